#include "diffgan/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <vector>

#include "diffgan/error.hpp"
#include "diffgan/kernels.hpp"

namespace diffgan {

Tensor extract_features(const Tensor& images, const FeatureExtractor& extractor) {
    const auto& s = images.shape();
    if (s.size() != 4) throw ArgError("extract_features: images must be [N,C,H,W], got " + images.shape_str());
    const int n = s[0];

    if (extractor.kind == FeatureExtractor::Kind::kRawPixels) {
        const int64_t d = images.numel() / n;
        Tensor out({n, static_cast<int>(d)});
        for (int64_t i = 0; i < images.numel(); ++i) out[i] = (images[i] + 1.0) * 0.5;
        return out;
    }

    // random_conv: untrained stride-2 stack, weights fixed by seed.
    Tensor x = images;
    int in_ch = s[1];
    for (int layer = 0; layer < extractor.depth; ++layer) {
        Rng wrng(extractor.seed, stream_id(0x7EA7, static_cast<uint64_t>(layer)));
        Tensor w = Tensor::randn(wrng, {extractor.width, in_ch, 3, 3});
        const double scale = 1.0 / std::sqrt(double(in_ch) * 9.0);
        for (auto& v : w.vec()) v *= scale;
        x = kernels::conv2d_forward(x, w, 2, 1);
        for (auto& v : x.vec()) v = v >= 0 ? v : 0.2 * v;
        in_ch = extractor.width;
    }
    // global average pool
    const auto& xs = x.shape();
    const int64_t hw = int64_t(xs[2]) * xs[3];
    Tensor out({n, extractor.width});
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < extractor.width; ++c) {
            const double* p = x.data() + (int64_t(i) * extractor.width + c) * hw;
            double acc = 0.0;
            for (int64_t k = 0; k < hw; ++k) acc += p[k];
            out[int64_t(i) * extractor.width + c] = acc / double(hw);
        }
    return out;
}

GaussianStats fit_gaussian(const Tensor& features) {
    const auto& s = features.shape();
    if (s.size() != 2) throw ArgError("fit_gaussian: features must be [n,d], got " + features.shape_str());
    const int n = s[0], d = s[1];
    if (n < 2) throw ArgError("fit_gaussian: need at least 2 rows, got " + std::to_string(n));

    GaussianStats g;
    g.mu = Tensor({d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) g.mu[j] += features[int64_t(i) * d + j];
    for (int j = 0; j < d; ++j) g.mu[j] /= double(n);

    g.sigma = Tensor({d, d});
    std::vector<double> centered(static_cast<size_t>(d));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) centered[static_cast<size_t>(j)] = features[int64_t(i) * d + j] - g.mu[j];
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b) g.sigma[int64_t(a) * d + b] += centered[a] * centered[b];
    }
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            const double v = g.sigma[int64_t(a) * d + b] / double(n - 1);
            g.sigma[int64_t(a) * d + b] = v;
            g.sigma[int64_t(b) * d + a] = v;
        }
    return g;
}

namespace {

using EMat = Eigen::MatrixXd;

EMat to_eigen(const Tensor& t, int d) {
    EMat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = t[int64_t(i) * d + j];
    return m;
}

void check_symmetric(const Tensor& sigma, int d, const char* who) {
    double scale = 0.0;
    for (int64_t i = 0; i < sigma.numel(); ++i) scale = std::max(scale, std::fabs(sigma[i]));
    const double tol = 1e-9 * std::max(scale, 1.0);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (std::fabs(sigma[int64_t(i) * d + j] - sigma[int64_t(j) * d + i]) > tol)
                throw ArgError(std::string(who) + ": covariance is not symmetric");
}

// Q f(L) Q^T for a symmetric matrix, clamping negative eigenvalues to zero.
// Warns when an eigenvalue falls below -1e-6 * max eigenvalue.
EMat sqrtm_psd(const EMat& m, const char* who) {
    Eigen::SelfAdjointEigenSolver<EMat> es(m);
    if (es.info() != Eigen::Success) throw NumericError(std::string(who) + ": eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double evmax = std::max(ev.maxCoeff(), 0.0);
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-6 * std::max(evmax, 1e-30))
            std::cerr << who << ": clamping negative eigenvalue " << ev(i) << "\n";
        ev(i) = ev(i) > 0 ? std::sqrt(ev(i)) : 0.0;
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const GaussianStats& a, const GaussianStats& b) {
    const int d = a.mu.dim(0);
    if (b.mu.dim(0) != d || a.sigma.shape() != std::vector<int>{d, d} ||
        b.sigma.shape() != std::vector<int>{d, d})
        throw ArgError("fid: dimension mismatch between stats");
    check_symmetric(a.sigma, d, "fid");
    check_symmetric(b.sigma, d, "fid");

    if (a.mu.vec() == b.mu.vec() && a.sigma.vec() == b.sigma.vec()) return 0.0;

    double mu_term = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = a.mu[i] - b.mu[i];
        mu_term += diff * diff;
    }

    const EMat sa = to_eigen(a.sigma, d);
    const EMat sb = to_eigen(b.sigma, d);
    const EMat sa_half = sqrtm_psd(sa, "fid");
    EMat prod = sa_half * sb * sa_half;
    prod = 0.5 * (prod + prod.transpose().eval());  // enforce symmetry
    const EMat prod_half = sqrtm_psd(prod, "fid");

    const double value = mu_term + sa.trace() + sb.trace() - 2.0 * prod_half.trace();
    return std::max(value, 0.0);
}

double kid_kernel(const double* x, const double* y, int d) {
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += x[i] * y[i];
    const double base = dot / double(d) + 1.0;
    return base * base * base;
}

namespace {

// Unbiased MMD^2 on one pair of row ranges.
double mmd2_unbiased(const Tensor& a, int a0, int a1, const Tensor& b, int b0, int b1, int d) {
    const int m = a1 - a0, n = b1 - b0;
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (int i = a0; i < a1; ++i)
        for (int j = a0; j < a1; ++j)
            if (i != j) kaa += kid_kernel(a.data() + int64_t(i) * d, a.data() + int64_t(j) * d, d);
    for (int i = b0; i < b1; ++i)
        for (int j = b0; j < b1; ++j)
            if (i != j) kbb += kid_kernel(b.data() + int64_t(i) * d, b.data() + int64_t(j) * d, d);
    for (int i = a0; i < a1; ++i)
        for (int j = b0; j < b1; ++j)
            kab += kid_kernel(a.data() + int64_t(i) * d, b.data() + int64_t(j) * d, d);
    return kaa / (double(m) * (m - 1)) + kbb / (double(n) * (n - 1)) - 2.0 * kab / (double(m) * n);
}

}  // namespace

double kid(const Tensor& feats_a, const Tensor& feats_b, int block_size) {
    const auto& sa = feats_a.shape();
    const auto& sb = feats_b.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1])
        throw ArgError("kid: features must be [n,d] with matching d");
    if (sa[0] < 2 || sb[0] < 2) throw ArgError("kid: need at least 2 rows per side");
    if (block_size < 2) throw ArgError("kid: block_size must be >= 2");
    const int d = sa[1];
    const int n_min = std::min(sa[0], sb[0]);
    const int n_blocks = (n_min + block_size - 1) / block_size;

    double acc = 0.0;
    int used = 0;
    for (int blk = 0; blk < n_blocks; ++blk) {
        const int a0 = blk * block_size, a1 = std::min((blk + 1) * block_size, sa[0]);
        const int b0 = blk * block_size, b1 = std::min((blk + 1) * block_size, sb[0]);
        if (a1 - a0 < 2 || b1 - b0 < 2) continue;  // unbiased estimator needs pairs
        acc += mmd2_unbiased(feats_a, a0, a1, feats_b, b0, b1, d);
        ++used;
    }
    if (used == 0) throw ArgError("kid: no usable blocks");
    return acc / double(used);
}

std::pair<double, double> precision_recall(const Tensor& feats_real, const Tensor& feats_fake,
                                           int k) {
    const auto& sr = feats_real.shape();
    const auto& sf = feats_fake.shape();
    if (sr.size() != 2 || sf.size() != 2 || sr[1] != sf[1])
        throw ArgError("precision_recall: features must be [n,d] with matching d");
    if (sr[0] <= k || sf[0] <= k)
        throw ArgError("precision_recall: need more than k=" + std::to_string(k) + " rows per side");
    const int d = sr[1];

    auto sqdist = [d](const double* x, const double* y) {
        double acc = 0.0;
        for (int i = 0; i < d; ++i) {
            const double diff = x[i] - y[i];
            acc += diff * diff;
        }
        return acc;
    };

    // k-NN radius of each point within its own set; ties resolved by index.
    auto knn_radii = [&](const Tensor& s) {
        const int n = s.dim(0);
        std::vector<double> radii(static_cast<size_t>(n));
        std::vector<std::pair<double, int>> dists;
        for (int i = 0; i < n; ++i) {
            dists.clear();
            for (int j = 0; j < n; ++j)
                if (j != i) dists.emplace_back(sqdist(s.data() + int64_t(i) * d, s.data() + int64_t(j) * d), j);
            std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
            radii[static_cast<size_t>(i)] = dists[static_cast<size_t>(k - 1)].first;
        }
        return radii;
    };

    auto covered_fraction = [&](const Tensor& points, const Tensor& manifold,
                                const std::vector<double>& radii) {
        const int np = points.dim(0), nm = manifold.dim(0);
        int inside = 0;
        for (int i = 0; i < np; ++i) {
            for (int j = 0; j < nm; ++j) {
                if (sqdist(points.data() + int64_t(i) * d, manifold.data() + int64_t(j) * d) <=
                    radii[static_cast<size_t>(j)]) {
                    ++inside;
                    break;
                }
            }
        }
        return double(inside) / double(np);
    };

    const auto real_radii = knn_radii(feats_real);
    const auto fake_radii = knn_radii(feats_fake);
    const double precision = covered_fraction(feats_fake, feats_real, real_radii);
    const double recall = covered_fraction(feats_real, feats_fake, fake_radii);
    return {precision, recall};
}

ModeCoverage mode_coverage(const Tensor& samples_2d, const Tensor& centers, double radius) {
    const auto& ss = samples_2d.shape();
    const auto& cs = centers.shape();
    if (ss.size() != 2 || ss[1] != 2) throw ArgError("mode_coverage: samples must be [n,2]");
    if (cs.size() != 2 || cs[1] != 2) throw ArgError("mode_coverage: centers must be [m,2]");
    if (!(radius > 0.0)) throw ArgError("mode_coverage: radius must be > 0");
    const int n = ss[0], m = cs[0];
    const double r2 = radius * radius;

    std::vector<int64_t> counts(static_cast<size_t>(m), 0);
    int64_t hq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = samples_2d[int64_t(i) * 2], y = samples_2d[int64_t(i) * 2 + 1];
        bool near_any = false;
        for (int j = 0; j < m; ++j) {
            const double dx = x - centers[int64_t(j) * 2], dy = y - centers[int64_t(j) * 2 + 1];
            if (dx * dx + dy * dy <= r2) {
                ++counts[static_cast<size_t>(j)];
                near_any = true;
            }
        }
        hq += near_any;
    }
    ModeCoverage out;
    for (int j = 0; j < m; ++j)
        if (double(counts[static_cast<size_t>(j)]) >= 0.01 * double(n)) ++out.modes_covered;
    out.hq_fraction = double(hq) / double(n);
    return out;
}

}  // namespace diffgan
