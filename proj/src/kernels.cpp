#include "diffgan/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "diffgan/error.hpp"

namespace diffgan::kernels {

void mm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * size_t(m) * size_t(n));
    for (int i = 0; i < m; ++i) {
        const double* arow = a + size_t(i) * k;
        double* crow = c + size_t(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + size_t(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void mm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * size_t(m) * size_t(n));
    for (int i = 0; i < m; ++i) {
        const double* arow = a + size_t(i) * k;
        double* crow = c + size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + size_t(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

void mm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate) {
    // a is k x m, b is k x n, c is m x n
    if (!accumulate) std::memset(c, 0, sizeof(double) * size_t(m) * size_t(n));
    for (int p = 0; p < k; ++p) {
        const double* arow = a + size_t(p) * m;
        const double* brow = b + size_t(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + size_t(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

ConvDims conv2d_dims(const std::vector<int>& is, const std::vector<int>& ks, int stride, int pad) {
    if (is.size() != 4) throw DimError("conv2d input must be [N,C,H,W], got " + shape_to_string(is));
    if (ks.size() != 4) throw DimError("conv2d kernel must be [O,C,kh,kw], got " + shape_to_string(ks));
    if (is[1] != ks[1])
        throw DimError("conv2d channel mismatch: input " + shape_to_string(is) + " vs kernel " +
                       shape_to_string(ks));
    if (stride < 1) throw ArgError("conv2d stride must be >= 1");
    if (pad < 0) throw ArgError("conv2d pad must be >= 0");
    ConvDims d;
    d.n = is[0]; d.c = is[1]; d.h = is[2]; d.w = is[3];
    d.o = ks[0]; d.kh = ks[2]; d.kw = ks[3];
    d.stride = stride; d.pad = pad;
    if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw)
        throw DimError("conv2d kernel " + shape_to_string(ks) + " larger than padded input " +
                       shape_to_string(is) + " with pad " + std::to_string(pad));
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    return d;
}

namespace {

// im2col for one sample: col is [C*kh*kw, oh*ow].
void im2col(const double* x, const ConvDims& d, double* col) {
    const int ohw = d.oh * d.ow;
    for (int c = 0; c < d.c; ++c) {
        const double* xc = x + size_t(c) * d.h * d.w;
        for (int ki = 0; ki < d.kh; ++ki) {
            for (int kj = 0; kj < d.kw; ++kj) {
                double* crow = col + size_t((c * d.kh + ki) * d.kw + kj) * ohw;
                for (int oi = 0; oi < d.oh; ++oi) {
                    const int ii = oi * d.stride + ki - d.pad;
                    double* out = crow + size_t(oi) * d.ow;
                    if (ii < 0 || ii >= d.h) {
                        std::memset(out, 0, sizeof(double) * size_t(d.ow));
                        continue;
                    }
                    const double* xrow = xc + size_t(ii) * d.w;
                    for (int oj = 0; oj < d.ow; ++oj) {
                        const int jj = oj * d.stride + kj - d.pad;
                        out[oj] = (jj >= 0 && jj < d.w) ? xrow[jj] : 0.0;
                    }
                }
            }
        }
    }
}

// Scatter-add of a column matrix back to one sample's input gradient.
void col2im_acc(const double* col, const ConvDims& d, double* gx) {
    const int ohw = d.oh * d.ow;
    for (int c = 0; c < d.c; ++c) {
        double* gc = gx + size_t(c) * d.h * d.w;
        for (int ki = 0; ki < d.kh; ++ki) {
            for (int kj = 0; kj < d.kw; ++kj) {
                const double* crow = col + size_t((c * d.kh + ki) * d.kw + kj) * ohw;
                for (int oi = 0; oi < d.oh; ++oi) {
                    const int ii = oi * d.stride + ki - d.pad;
                    if (ii < 0 || ii >= d.h) continue;
                    double* grow = gc + size_t(ii) * d.w;
                    const double* in = crow + size_t(oi) * d.ow;
                    for (int oj = 0; oj < d.ow; ++oj) {
                        const int jj = oj * d.stride + kj - d.pad;
                        if (jj >= 0 && jj < d.w) grow[jj] += in[oj];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, int stride, int pad) {
    const ConvDims d = conv2d_dims(input.shape(), kernel.shape(), stride, pad);
    Tensor out({d.n, d.o, d.oh, d.ow});
    const int ckk = d.c * d.kh * d.kw;
    const int ohw = d.oh * d.ow;
    std::vector<double> col(size_t(ckk) * ohw);
    for (int n = 0; n < d.n; ++n) {
        im2col(input.data() + size_t(n) * d.c * d.h * d.w, d, col.data());
        // out_n [O, ohw] = kernel [O, ckk] * col [ckk, ohw]
        mm_nn(kernel.data(), col.data(), out.data() + size_t(n) * d.o * ohw, d.o, ckk, ohw, false);
    }
    return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int pad,
                     const Tensor& grad_out, Tensor* grad_input, Tensor* grad_kernel) {
    const ConvDims d = conv2d_dims(input.shape(), kernel.shape(), stride, pad);
    const int ckk = d.c * d.kh * d.kw;
    const int ohw = d.oh * d.ow;
    std::vector<double> col(size_t(ckk) * ohw);
    for (int n = 0; n < d.n; ++n) {
        const double* go = grad_out.data() + size_t(n) * d.o * ohw;
        if (grad_kernel) {
            im2col(input.data() + size_t(n) * d.c * d.h * d.w, d, col.data());
            // dK [O, ckk] += go [O, ohw] * col^T
            mm_nt(go, col.data(), grad_kernel->data(), d.o, ohw, ckk, true);
        }
        if (grad_input) {
            // dcol [ckk, ohw] = K^T [ckk, O] * go [O, ohw]
            mm_tn(kernel.data(), go, col.data(), ckk, d.o, ohw, false);
            col2im_acc(col.data(), d, grad_input->data() + size_t(n) * d.c * d.h * d.w);
        }
    }
}

Tensor upsample2x_forward(const Tensor& input) {
    const auto& s = input.shape();
    if (s.size() != 4) throw DimError("upsample2x input must be [N,C,H,W], got " + input.shape_str());
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    Tensor out({n, c, 2 * h, 2 * w});
    for (int i = 0; i < n * c; ++i) {
        const double* xp = input.data() + size_t(i) * h * w;
        double* op = out.data() + size_t(i) * 4 * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double v = xp[size_t(y) * w + x];
                double* o0 = op + size_t(2 * y) * 2 * w + 2 * x;
                o0[0] = v;
                o0[1] = v;
                o0[2 * w] = v;
                o0[2 * w + 1] = v;
            }
        }
    }
    return out;
}

void upsample2x_backward(const Tensor& grad_out, Tensor& grad_input) {
    const auto& s = grad_input.shape();
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    for (int i = 0; i < n * c; ++i) {
        const double* gp = grad_out.data() + size_t(i) * 4 * h * w;
        double* gi = grad_input.data() + size_t(i) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double* g0 = gp + size_t(2 * y) * 2 * w + 2 * x;
                gi[size_t(y) * w + x] += g0[0] + g0[1] + g0[2 * w] + g0[2 * w + 1];
            }
        }
    }
}

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
    const auto& s = image.shape();
    if (s.size() != 3) throw DimError("resize_bilinear expects [C,H,W], got " + image.shape_str());
    const int c = s[0], h = s[1], w = s[2];
    if (out_h <= 0 || out_w <= 0) throw ArgError("resize_bilinear: output size must be positive");
    Tensor out({c, out_h, out_w});
    const double sy = double(h) / out_h;
    const double sx = double(w) / out_w;
    for (int ch = 0; ch < c; ++ch) {
        const double* src = image.data() + size_t(ch) * h * w;
        double* dst = out.data() + size_t(ch) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const double fy = (oy + 0.5) * sy - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            const double wy = fy - y0;
            int y1 = std::min(y0 + 1, h - 1);
            y0 = std::clamp(y0, 0, h - 1);
            y1 = std::clamp(y1, 0, h - 1);
            for (int ox = 0; ox < out_w; ++ox) {
                const double fx = (ox + 0.5) * sx - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                const double wx = fx - x0;
                int x1 = std::min(x0 + 1, w - 1);
                x0 = std::clamp(x0, 0, w - 1);
                x1 = std::clamp(x1, 0, w - 1);
                const double top = src[size_t(y0) * w + x0] * (1 - wx) + src[size_t(y0) * w + x1] * wx;
                const double bot = src[size_t(y1) * w + x0] * (1 - wx) + src[size_t(y1) * w + x1] * wx;
                dst[size_t(oy) * out_w + ox] = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

}  // namespace diffgan::kernels
