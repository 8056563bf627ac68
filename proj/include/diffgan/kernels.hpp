#pragma once

#include "diffgan/tensor.hpp"

namespace diffgan::kernels {

// Dense matrix kernels, row-major. C is m x n.
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);  // C += A * B^T, B is n x k
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool accumulate);  // C += A^T * B, A is k x m

struct ConvDims {
    int n, c, h, w;      // input
    int o, kh, kw;       // kernel
    int stride, pad;
    int oh, ow;          // output
};

/// Validates shapes and computes output size for cross-correlation.
ConvDims conv2d_dims(const std::vector<int>& input_shape, const std::vector<int>& kernel_shape,
                     int stride, int pad);

/// Cross-correlation (no kernel flip). input [N,C,H,W], kernel [O,C,kh,kw].
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, int stride, int pad);

/// Gradients of conv2d_forward; either output pointer may be null to skip.
void conv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int pad,
                     const Tensor& grad_out, Tensor* grad_input, Tensor* grad_kernel);

/// Nearest-neighbor 2x upsample of [N,C,H,W].
Tensor upsample2x_forward(const Tensor& input);
void upsample2x_backward(const Tensor& grad_out, Tensor& grad_input);

/// Bilinear resize with half-pixel centers, single image [C,H,W] -> [C,out_h,out_w].
Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

}  // namespace diffgan::kernels
