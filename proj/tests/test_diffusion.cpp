#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffgan/diffusion.hpp"
#include "diffgan/error.hpp"

using namespace diffgan;

TEST_CASE("make_schedule: products of (1 - beta)") {
    NoiseSchedule s = make_schedule(2, 0.5, 0.5, 0.05);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s.alpha_bar(0) == 1.0);

    NoiseSchedule one = make_schedule(1, 0.3, 0.3, 1.0);
    CHECK(one.alpha_bar(1) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("make_schedule: default-style schedule is strictly decreasing") {
    NoiseSchedule s = make_schedule(1000, 1e-4, 2e-2, 0.05);
    double direct = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        direct *= 1.0 - s.beta(t);
        CHECK(s.alpha_bar(t) == doctest::Approx(direct).epsilon(1e-12));
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
    CHECK(s.alpha_bar(1000) < 0.01);
}

TEST_CASE("make_schedule rejects bad ranges") {
    CHECK_THROWS_AS(make_schedule(0, 0.1, 0.2, 0.05), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.2, 0.05), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.3, 0.2, 0.05), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.1, 1.0, 0.05), ConfigError);
    CHECK_THROWS_AS(make_schedule(10, 0.1, 0.2, 0.0), ConfigError);
}

TEST_CASE("q_sample: t=0 is the identity") {
    NoiseSchedule s = make_schedule(10, 0.02, 0.02, 0.05);
    Rng rng(1, 1);
    Var x0 = make_param(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    Var y = q_sample(x0, 0, s, rng);
    CHECK(y.get() == x0.get());
    CHECK_THROWS_AS(q_sample(x0, 11, s, rng), ArgError);
    CHECK_THROWS_AS(q_sample(x0, -1, s, rng), ArgError);
}

TEST_CASE("q_sample: sample mean matches sqrt(alpha_bar) x0 at t=5") {
    NoiseSchedule s = make_schedule(10, 0.02, 0.02, 0.05);
    const double ab5 = std::pow(0.98, 5);
    CHECK(s.alpha_bar(5) == doctest::Approx(ab5).epsilon(1e-12));

    Rng rng(7, 2);
    const double x0v = 1.0;
    Var x0 = make_const(Tensor::full({100, 10}, x0v));  // 1000 values per draw
    double acc = 0.0;
    const int reps = 100;  // 1e5 values total
    for (int r = 0; r < reps; ++r) {
        Var y = q_sample(x0, 5, s, rng);
        for (int64_t i = 0; i < y->value.numel(); ++i) acc += y->value[i];
    }
    const double mean = acc / (reps * 1000.0);
    CHECK(std::fabs(mean - std::sqrt(ab5) * x0v) / (std::sqrt(ab5) * x0v) < 0.01);
}

TEST_CASE("q_sample gradient is exactly sqrt(alpha_bar_t) per coordinate") {
    NoiseSchedule s = make_schedule(100, 1e-3, 2e-2, 0.05);
    Rng trng(3, 9);
    for (int rep = 0; rep < 20; ++rep) {
        const int t = static_cast<int>(trng.uniform_int(1, 100));
        Rng rng(11, static_cast<uint64_t>(rep));
        Var x0 = make_param(Tensor::randn(rng, {4, 3}));
        Var y = q_sample(x0, t, s, rng);
        backward(sum(y));
        const double expect = std::sqrt(s.alpha_bar(t));
        for (int64_t i = 0; i < x0->grad.numel(); ++i)
            CHECK(std::fabs(x0->grad[i] - expect) < 1e-12);
    }
}

TEST_CASE("diffuse_batch: per-sample coefficients, t=0 rows untouched") {
    NoiseSchedule s = make_schedule(10, 0.02, 0.02, 0.05);
    Rng rng(5, 4);
    Var x0 = make_param(Tensor::randn(rng, {3, 4}));
    Var y = diffuse_batch(x0, {0, 5, 10}, s, rng);
    for (int k = 0; k < 4; ++k) CHECK(y->value[k] == doctest::Approx(x0->value[k]).epsilon(1e-15));
    backward(sum(y));
    for (int k = 0; k < 4; ++k) CHECK(x0->grad[k] == 1.0);
    for (int k = 0; k < 4; ++k)
        CHECK(std::fabs(x0->grad[4 + k] - std::sqrt(s.alpha_bar(5))) < 1e-12);
    CHECK_THROWS_AS(diffuse_batch(x0, {0, 1}, s, rng), DimError);
}

TEST_CASE("marginal equivalence: single step and t=50") {
    NoiseSchedule s = make_schedule(100, 5e-3, 2e-2, 0.05);
    Rng rng(17, 1);
    MarginalReport r1 = marginal_equivalence_check(s, 1, 10000, rng);
    // one step: same law; 3 standard errors on the pooled moments
    const int64_t total = 10000 * 8;
    const double se_mean = std::sqrt(r1.closed_var / double(total));
    CHECK(std::fabs(r1.empirical_mean - r1.closed_mean) < 3 * se_mean);
    const double se_var = r1.closed_var * std::sqrt(2.0 / double(total - 1));
    CHECK(std::fabs(r1.empirical_var - r1.closed_var) < 3 * se_var);

    MarginalReport r50 = marginal_equivalence_check(s, 50, 10000, rng);
    CHECK(r50.mean_rel_err < 0.02);
    CHECK(r50.var_rel_err < 0.02);
}

TEST_CASE("marginal equivalence: sigma = 0 is exact") {
    NoiseSchedule s = make_schedule(20, 1e-2, 1e-2, 1.0);
    s.sigma = 0.0;  // degenerate-noise schedule, built directly
    Rng rng(23, 1);
    MarginalReport r = marginal_equivalence_check(s, 20, 100, rng);
    CHECK(r.empirical_var == 0.0);
    CHECK(r.empirical_mean == doctest::Approx(r.closed_mean).epsilon(1e-12));
}

TEST_CASE("sample_tepl: composition and the t_current=1 case") {
    Rng rng(31, 1);
    for (TimestepDist d : {TimestepDist::kUniform, TimestepDist::kPriority}) {
        DiffusionState st = make_diffusion_state(1, 0.6, 2, d, 1, 10);
        sample_tepl(st, rng);
        REQUIRE(st.tepl.size() == kTeplSize);
        int zeros = 0;
        for (int i = 0; i < kTeplSize; ++i) {
            if (st.tepl[i] == 0) ++zeros;
            if (i >= kTeplZeros) CHECK(st.tepl[i] == 1);
        }
        CHECK(zeros == kTeplZeros);
    }
}

TEST_CASE("sample_tepl: priority frequencies follow p(t) ~ t") {
    DiffusionState st = make_diffusion_state(2, 0.6, 2, TimestepDist::kPriority, 1, 10);
    st.t_current = 2;
    Rng rng(37, 1);
    int64_t ones = 0, twos = 0;
    const int refreshes = 100000;
    for (int r = 0; r < refreshes; ++r) {
        sample_tepl(st, rng);
        for (int i = kTeplZeros; i < kTeplSize; ++i) {
            if (st.tepl[i] == 1) ++ones;
            else if (st.tepl[i] == 2) ++twos;
        }
    }
    const double total = double(ones + twos);
    CHECK(std::fabs(ones / total - 1.0 / 3.0) < 0.01);
    CHECK(std::fabs(twos / total - 2.0 / 3.0) < 0.01);
}

TEST_CASE("sample_tepl: max entry bounded by t_current") {
    DiffusionState st = make_diffusion_state(7, 0.6, 2, TimestepDist::kPriority, 1, 50);
    Rng rng(41, 1);
    for (int r = 0; r < 200; ++r) {
        sample_tepl(st, rng);
        int zeros = 0;
        for (int v : st.tepl) {
            CHECK(v >= 0);
            CHECK(v <= st.t_current);
            if (v == 0) ++zeros;
        }
        CHECK(zeros == kTeplZeros);
        st.t_current = 1 + (st.t_current * 3) % 50;
    }
}

TEST_CASE("draw_t: composition fractions and determinism") {
    DiffusionState st = make_diffusion_state(1, 0.6, 2, TimestepDist::kUniform, 1, 10);
    Rng rng(43, 1);
    auto all_zero = draw_t(st, rng, 100);
    for (int t : all_zero) CHECK(t == 0);

    for (int i = kTeplZeros; i < kTeplSize; ++i) st.tepl[i] = 1;
    Rng r2(43, 2);
    auto draws = draw_t(st, r2, 100000);
    int64_t zeros = 0;
    for (int t : draws) zeros += t == 0;
    CHECK(std::fabs(zeros / 100000.0 - 0.5) < 0.01);

    Rng ra(9, 9), rb(9, 9);
    CHECK(draw_t(st, ra, 50) == draw_t(st, rb, 50));
}

TEST_CASE("compute_rd: signs of sigmoid(logit) - 0.5") {
    CHECK(compute_rd(Tensor({3}, {2, -1, 3})) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(compute_rd(Tensor({4}, {0, 0, 0, 0})) == 0.0);
    CHECK(compute_rd(Tensor({3}, {25, 30, 12})) == 1.0);
}

TEST_CASE("update_T: formula and clamping") {
    DiffusionState st = make_diffusion_state(8, 0.6, 2, TimestepDist::kPriority, 1, 10);
    update_T(st, 0.9);
    CHECK(st.t_current == 10);
    st.t_current = 8;
    update_T(st, 0.3);
    CHECK(st.t_current == 6);
    st.t_current = 10;
    update_T(st, 1.0);
    CHECK(st.t_current == 10);  // clamped at t_max
    st.t_current = 8;
    update_T(st, 0.6);
    CHECK(st.t_current == 8);  // r_d == d_target leaves T unchanged
    st.t_current = 1;
    update_T(st, 0.0);
    CHECK(st.t_current == 1);  // clamped at t_min
}

TEST_CASE("controller monotonicity: r_d above target drives T to t_max") {
    const int t0 = 5, t_max = 37, c = 4;
    DiffusionState st = make_diffusion_state(t0, 0.6, c, TimestepDist::kUniform, 1, t_max);
    const int expected_updates = (t_max - t0 + c - 1) / c;
    int updates = 0;
    while (st.t_current < t_max) {
        update_T(st, 0.95);
        ++updates;
        CHECK(st.t_current <= t_max);
        REQUIRE(updates <= expected_updates);
    }
    CHECK(updates == expected_updates);
}
