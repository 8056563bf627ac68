#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffgan/error.hpp"
#include "diffgan/metrics.hpp"

using namespace diffgan;

namespace {

// Test-side brute-force unbiased MMD^2 (independent of the block estimator).
double mmd2_bruteforce(const Tensor& a, const Tensor& b) {
    const int m = a.dim(0), n = b.dim(0), d = a.dim(1);
    double kaa = 0, kbb = 0, kab = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) kaa += kid_kernel(a.data() + int64_t(i) * d, a.data() + int64_t(j) * d, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) kbb += kid_kernel(b.data() + int64_t(i) * d, b.data() + int64_t(j) * d, d);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            kab += kid_kernel(a.data() + int64_t(i) * d, b.data() + int64_t(j) * d, d);
    return kaa / (double(m) * (m - 1)) + kbb / (double(n) * (n - 1)) - 2 * kab / (double(m) * n);
}

}  // namespace

TEST_CASE("extract_features: raw pixels rescale and constancy") {
    Tensor img = Tensor::full({2, 1, 2, 2}, 0.5);
    FeatureExtractor ex;
    ex.kind = FeatureExtractor::Kind::kRawPixels;
    Tensor f = extract_features(img, ex);
    CHECK(f.shape() == std::vector<int>{2, 4});
    for (int64_t i = 0; i < f.numel(); ++i) CHECK(f[i] == doctest::Approx(0.75).epsilon(1e-12));

    Tensor white = Tensor::full({1, 1, 2, 2}, 1.0);
    Tensor fw = extract_features(white, ex);
    for (int64_t i = 0; i < fw.numel(); ++i) CHECK(fw[i] == 1.0);
}

TEST_CASE("extract_features: random_conv determinism and width") {
    Rng rng(3, 1);
    Tensor imgs = Tensor::randn(rng, {4, 1, 16, 16});
    FeatureExtractor ex;
    ex.kind = FeatureExtractor::Kind::kRandomConv;
    ex.seed = 99;
    ex.width = 24;
    ex.depth = 2;
    Tensor f1 = extract_features(imgs, ex);
    Tensor f2 = extract_features(imgs, ex);
    CHECK(f1.shape() == std::vector<int>{4, 24});
    for (int64_t i = 0; i < f1.numel(); ++i) CHECK(f1[i] == f2[i]);

    FeatureExtractor other = ex;
    other.seed = 100;
    Tensor f3 = extract_features(imgs, other);
    bool differ = false;
    for (int64_t i = 0; i < f1.numel(); ++i) differ = differ || f1[i] != f3[i];
    CHECK(differ);
}

TEST_CASE("fit_gaussian: tiny cases") {
    GaussianStats g = fit_gaussian(Tensor({2, 1}, {0, 2}));
    CHECK(g.mu[0] == doctest::Approx(1.0));
    CHECK(g.sigma[0] == doctest::Approx(2.0));

    GaussianStats c = fit_gaussian(Tensor::full({5, 3}, 1.25));
    for (int64_t i = 0; i < c.sigma.numel(); ++i) CHECK(c.sigma[i] == 0.0);

    CHECK_THROWS_AS(fit_gaussian(Tensor({1, 3})), ArgError);
}

TEST_CASE("fit_gaussian: Monte Carlo against N(0, diag(1,4))") {
    Rng rng(17, 1);
    const int n = 100000;
    Tensor f({n, 2});
    for (int i = 0; i < n; ++i) {
        f[int64_t(i) * 2] = rng.normal();
        f[int64_t(i) * 2 + 1] = 2.0 * rng.normal();
    }
    GaussianStats g = fit_gaussian(f);
    CHECK(std::fabs(g.mu[0]) < 0.05);
    CHECK(std::fabs(g.mu[1]) < 0.05);
    CHECK(std::fabs(g.sigma[0] - 1.0) < 0.02);
    CHECK(std::fabs(g.sigma[3] - 4.0) < 0.08);
}

TEST_CASE("fid: identity, 1-D and diagonal analytic cases") {
    GaussianStats a{Tensor({1}, {0.0}), Tensor({1, 1}, {1.0})};
    GaussianStats b{Tensor({1}, {1.0}), Tensor({1, 1}, {1.0})};
    CHECK(fid(a, a) == 0.0);
    CHECK(fid(a, b) == doctest::Approx(1.0).epsilon(1e-12));

    GaussianStats c{Tensor({2}, {0.3, -0.7}), Tensor({2, 2}, {1, 0, 0, 1})};
    GaussianStats e{Tensor({2}, {0.3, -0.7}), Tensor({2, 2}, {4, 0, 0, 4})};
    CHECK(fid(c, e) == doctest::Approx(2.0).epsilon(1e-9));

    // general diagonal oracle: sum (mu diff)^2 + sum (sqrt(va) - sqrt(vb))^2
    Rng rng(23, 1);
    const int d = 6;
    GaussianStats ga{Tensor({d}), Tensor({d, d})};
    GaussianStats gb{Tensor({d}), Tensor({d, d})};
    double expect = 0.0;
    for (int i = 0; i < d; ++i) {
        ga.mu[i] = rng.normal();
        gb.mu[i] = rng.normal();
        const double va = 0.5 + rng.uniform();
        const double vb = 0.5 + rng.uniform();
        ga.sigma[int64_t(i) * d + i] = va;
        gb.sigma[int64_t(i) * d + i] = vb;
        expect += (ga.mu[i] - gb.mu[i]) * (ga.mu[i] - gb.mu[i]);
        expect += (std::sqrt(va) - std::sqrt(vb)) * (std::sqrt(va) - std::sqrt(vb));
    }
    CHECK(std::fabs(fid(ga, gb) - expect) < 1e-9);

    // symmetry
    CHECK(std::fabs(fid(ga, gb) - fid(gb, ga)) < 1e-8);
}

TEST_CASE("fid rejects dimension mismatch and asymmetry") {
    GaussianStats a{Tensor({2}), Tensor({2, 2}, {1, 0, 0, 1})};
    GaussianStats b{Tensor({3}), Tensor({3, 3})};
    CHECK_THROWS_AS(fid(a, b), ArgError);
    GaussianStats bad{Tensor({2}), Tensor({2, 2}, {1, 0.5, 0.2, 1})};
    CHECK_THROWS_AS(fid(a, bad), ArgError);
}

TEST_CASE("kid kernel self-value on the all-ones vector") {
    for (int d : {1, 4, 16}) {
        Tensor x = Tensor::ones({d});
        CHECK(kid_kernel(x.data(), x.data(), d) == doctest::Approx(8.0).epsilon(1e-12));
    }
}

TEST_CASE("kid block estimator equals brute force on one block") {
    Rng rng(31, 1);
    Tensor a = Tensor::randn(rng, {50, 8});
    Tensor b = Tensor::randn(rng, {50, 8});
    for (auto& v : b.vec()) v += 0.3;
    CHECK(std::fabs(kid(a, b, 500) - mmd2_bruteforce(a, b)) < 1e-12);

    Tensor a64 = Tensor::randn(rng, {64, 5});
    Tensor b64 = Tensor::randn(rng, {64, 5});
    CHECK(std::fabs(kid(a64, b64, 500) - mmd2_bruteforce(a64, b64)) < 1e-12);
}

TEST_CASE("kid: unbiased near zero on same-distribution draws") {
    Rng rng(37, 1);
    double acc = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = Tensor::randn(rng, {1000, 16});
        Tensor b = Tensor::randn(rng, {1000, 16});
        acc += kid(a, b, 500);
    }
    CHECK(std::fabs(acc / 20.0) < 0.005);
}

TEST_CASE("kid grows with separation") {
    Rng rng(41, 1);
    Tensor a = Tensor::randn(rng, {100, 4});
    double prev = 0.0;
    for (double sep : {1.0, 2.0, 4.0}) {
        Tensor b = Tensor::randn(rng, {100, 4});
        for (auto& v : b.vec()) v += sep;
        const double val = kid(a, b, 500);
        CHECK(val > prev);
        prev = val;
    }
}

TEST_CASE("precision_recall: identical and far-separated sets") {
    Rng rng(43, 1);
    Tensor a = Tensor::randn(rng, {30, 3});
    auto [p_same, r_same] = precision_recall(a, a, 3);
    CHECK(p_same == 1.0);
    CHECK(r_same == 1.0);

    Tensor far = a;
    for (auto& v : far.vec()) v += 1e6;
    auto [p_far, r_far] = precision_recall(a, far, 3);
    CHECK(p_far == 0.0);
    CHECK(r_far == 0.0);

    CHECK_THROWS_AS(precision_recall(Tensor({3, 2}), Tensor({5, 2}), 3), ArgError);
}

TEST_CASE("precision_recall: unit grid plus one far outlier") {
    const int side = 5, n = side * side;
    Tensor real({n, 2});
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            real[int64_t(i * side + j) * 2] = i;
            real[int64_t(i * side + j) * 2 + 1] = j;
        }
    Tensor fake({n + 1, 2});
    std::copy_n(real.data(), real.numel(), fake.data());
    fake[int64_t(n) * 2] = 1e5;
    fake[int64_t(n) * 2 + 1] = 1e5;

    auto [precision, recall] = precision_recall(real, fake, 3);
    CHECK(precision == doctest::Approx(double(n) / (n + 1)).epsilon(1e-12));
    CHECK(recall == 1.0);
}

TEST_CASE("precision_recall is permutation-invariant") {
    Rng rng(47, 1);
    Tensor real = Tensor::randn(rng, {20, 2});
    Tensor fake = Tensor::randn(rng, {22, 2});
    auto base = precision_recall(real, fake, 3);

    // reverse row order on both sides
    auto reversed = [](const Tensor& t) {
        const int n = t.dim(0), d = t.dim(1);
        Tensor out({n, d});
        for (int i = 0; i < n; ++i)
            std::copy_n(t.data() + int64_t(i) * d, d, out.data() + int64_t(n - 1 - i) * d);
        return out;
    };
    auto perm = precision_recall(reversed(real), reversed(fake), 3);
    CHECK(base.first == doctest::Approx(perm.first).epsilon(1e-12));
    CHECK(base.second == doctest::Approx(perm.second).epsilon(1e-12));
}

TEST_CASE("mode_coverage: exact hits and collapse signature") {
    const int side = 5;
    Tensor centers({side * side, 2});
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            centers[int64_t(i * side + j) * 2] = i;
            centers[int64_t(i * side + j) * 2 + 1] = j;
        }
    ModeCoverage all = mode_coverage(centers, centers, 0.1);
    CHECK(all.modes_covered == 25);
    CHECK(all.hq_fraction == 1.0);

    Tensor collapsed = Tensor({400, 2});
    for (int i = 0; i < 400; ++i) {
        collapsed[int64_t(i) * 2] = 2.0;
        collapsed[int64_t(i) * 2 + 1] = 2.0;
    }
    ModeCoverage one = mode_coverage(collapsed, centers, 0.1);
    CHECK(one.modes_covered == 1);
    CHECK(one.hq_fraction == 1.0);
}

TEST_CASE("mode_coverage: uniform box geometry oracle") {
    // samples uniform over [-L/2, L/2]^2; expected hq fraction ~ 25 pi r^2 / L^2
    Rng rng(53, 1);
    const double L = 20.0, r = 0.4;
    const int n = 200000;
    Tensor samples({n, 2});
    for (int64_t i = 0; i < 2 * n; ++i) samples[i] = (rng.uniform() - 0.5) * L;

    const int side = 5;
    Tensor centers({side * side, 2});
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            centers[int64_t(i * side + j) * 2] = (i - 2) * 2.0;
            centers[int64_t(i * side + j) * 2 + 1] = (j - 2) * 2.0;
        }
    ModeCoverage cov = mode_coverage(samples, centers, r);
    const double p = 25.0 * M_PI * r * r / (L * L);
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::fabs(cov.hq_fraction - p) < 3 * se);
}
