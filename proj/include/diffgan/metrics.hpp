#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "diffgan/tensor.hpp"

namespace diffgan {

/// Deterministic feature embedding for distribution metrics. The same
/// extractor instance must be used for both sides of any comparison; with
/// the random_conv kind the absolute metric values are not comparable to
/// Inception-feature numbers, only orderings are.
struct FeatureExtractor {
    enum class Kind { kRawPixels, kRandomConv };
    Kind kind = Kind::kRandomConv;
    uint64_t seed = 1234;
    int width = 32;  // feature dimension of random_conv
    int depth = 2;   // conv layers

    std::string name() const {
        return kind == Kind::kRawPixels ? "raw_pixels" : "random_conv";
    }
};

/// images [n,C,H,W] in [-1,1] -> features [n,d].
/// raw_pixels: flatten, rescale to [0,1]. random_conv: fixed-seed untrained
/// stride-2 conv stack with leaky_relu and global average pooling.
Tensor extract_features(const Tensor& images, const FeatureExtractor& extractor);

struct GaussianStats {
    Tensor mu;     // [d]
    Tensor sigma;  // [d,d], symmetric
};

/// Sample mean and unbiased sample covariance; needs n >= 2 rows.
GaussianStats fit_gaussian(const Tensor& features);

/// Frechet distance |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}).
/// Matrix square roots via eigendecomposition of the symmetrized product;
/// small negative eigenvalues are clamped (warning below -1e-6 * max).
double fid(const GaussianStats& a, const GaussianStats& b);

/// Degree-3 polynomial kernel (x.y / d + 1)^3 used by kid.
double kid_kernel(const double* x, const double* y, int d);

/// Unbiased MMD^2 with kid_kernel, averaged over disjoint index blocks of
/// block_size rows per side. May be slightly negative by unbiasedness.
double kid(const Tensor& feats_a, const Tensor& feats_b, int block_size = 500);

/// Improved precision/recall via k-NN manifolds. Ties in distance are
/// broken by index order. Needs more than k rows on each side.
std::pair<double, double> precision_recall(const Tensor& feats_real, const Tensor& feats_fake,
                                           int k = 3);

struct ModeCoverage {
    int modes_covered = 0;
    double hq_fraction = 0.0;
};

/// A mode counts as covered when at least 1% of samples land within radius
/// of its center; hq_fraction is the fraction within radius of any center.
ModeCoverage mode_coverage(const Tensor& samples_2d, const Tensor& centers, double radius);

}  // namespace diffgan
