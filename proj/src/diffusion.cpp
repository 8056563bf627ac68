#include "diffgan/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "diffgan/error.hpp"

namespace diffgan {

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > t_max) throw ArgError("beta: t=" + std::to_string(t) + " outside [1, t_max]");
    return betas[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > t_max)
        throw ArgError("alpha_bar: t=" + std::to_string(t) + " outside [0, t_max]");
    return t == 0 ? 1.0 : alpha_bars[static_cast<size_t>(t - 1)];
}

NoiseSchedule make_schedule(int t_max, double beta_min, double beta_max, double sigma) {
    if (t_max < 1) throw ConfigError("schedule: t_max must be >= 1");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
        throw ConfigError("schedule: need 0 < beta_min <= beta_max < 1");
    if (!(sigma > 0.0)) throw ConfigError("schedule: sigma must be > 0");
    NoiseSchedule s;
    s.t_max = t_max;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.sigma = sigma;
    s.betas.resize(static_cast<size_t>(t_max));
    s.alpha_bars.resize(static_cast<size_t>(t_max));
    double prod = 1.0;
    for (int t = 1; t <= t_max; ++t) {
        const double frac = t_max == 1 ? 0.0 : double(t - 1) / double(t_max - 1);
        const double b = beta_min + (beta_max - beta_min) * frac;
        prod *= 1.0 - b;
        s.betas[static_cast<size_t>(t - 1)] = b;
        s.alpha_bars[static_cast<size_t>(t - 1)] = prod;
    }
    return s;
}

DiffusionState make_diffusion_state(int t_start, double d_target, int c_step, TimestepDist p_pi,
                                    int t_min, int t_max) {
    if (t_min < 1 || t_min > t_max) throw ConfigError("diffusion state: need 1 <= t_min <= t_max");
    if (c_step < 1) throw ConfigError("diffusion state: c_step must be positive");
    if (!(d_target > 0.0 && d_target < 1.0))
        throw ConfigError("diffusion state: d_target must lie in (0,1)");
    DiffusionState st;
    st.t_current = std::clamp(t_start, t_min, t_max);
    st.d_target = d_target;
    st.c_step = c_step;
    st.p_pi = p_pi;
    st.t_min = t_min;
    st.t_max = t_max;
    st.tepl.assign(kTeplSize, 0);  // valid but unmixed; refresh before use
    return st;
}

namespace {

// Draw from p(t) proportional to t over [1, T].
int draw_priority(Rng& rng, int t_cur) {
    const int64_t total = int64_t(t_cur) * (t_cur + 1) / 2;
    const int64_t k = rng.uniform_int(0, total - 1);
    // smallest t with t(t+1)/2 > k
    int t = static_cast<int>((std::sqrt(8.0 * double(k) + 1.0) - 1.0) / 2.0);
    while (int64_t(t) * (t + 1) / 2 <= k) ++t;
    while (t > 1 && int64_t(t - 1) * t / 2 > k) --t;
    return t;
}

}  // namespace

void sample_tepl(DiffusionState& state, Rng& rng) {
    if (state.t_current < 1) throw ArgError("sample_tepl: t_current must be >= 1");
    state.tepl.assign(kTeplSize, 0);
    for (int i = kTeplZeros; i < kTeplSize; ++i) {
        state.tepl[static_cast<size_t>(i)] =
            state.p_pi == TimestepDist::kUniform
                ? static_cast<int>(rng.uniform_int(1, state.t_current))
                : draw_priority(rng, state.t_current);
    }
}

std::vector<int> draw_t(const DiffusionState& state, Rng& rng, int m) {
    if (state.tepl.empty()) throw ArgError("draw_t: tepl is empty");
    std::vector<int> out(static_cast<size_t>(m));
    for (auto& t : out)
        t = state.tepl[static_cast<size_t>(rng.uniform_int(0, int64_t(state.tepl.size()) - 1))];
    return out;
}

double compute_rd(const Tensor& real_logits) {
    const int64_t n = real_logits.numel();
    if (n == 0) throw ArgError("compute_rd: empty logits");
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-real_logits[i]));
        acc += p > 0.5 ? 1.0 : (p < 0.5 ? -1.0 : 0.0);
    }
    return acc / double(n);
}

void update_T(DiffusionState& state, double r_d) {
    const double diff = r_d - state.d_target;
    const int sgn = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
    state.t_current = std::clamp(state.t_current + sgn * state.c_step, state.t_min, state.t_max);
}

Var q_sample(const Var& x0, int t, const NoiseSchedule& schedule, Rng& rng) {
    if (t < 0 || t > schedule.t_max)
        throw ArgError("q_sample: t=" + std::to_string(t) + " outside [0, t_max]");
    if (t == 0) return x0;
    const double ab = schedule.alpha_bar(t);
    const double data_coef = std::sqrt(ab);
    const double noise_coef = std::sqrt(1.0 - ab) * schedule.sigma;
    Tensor noise = Tensor::randn(rng, x0->value.shape());
    for (int64_t i = 0; i < noise.numel(); ++i) noise[i] *= noise_coef;
    return add(scale(x0, data_coef), make_const(std::move(noise)));
}

Var diffuse_batch(const Var& x0, const std::vector<int>& ts, const NoiseSchedule& schedule,
                  Rng& rng) {
    const auto& shape = x0->value.shape();
    if (shape.empty() || shape[0] != static_cast<int>(ts.size()))
        throw DimError("diffuse_batch: need one timestep per sample, got " +
                       std::to_string(ts.size()) + " for " + x0->value.shape_str());
    std::vector<double> data_coefs(ts.size());
    Tensor noise = Tensor::randn(rng, shape);
    const int64_t per = x0->value.numel() / shape[0];
    for (size_t n = 0; n < ts.size(); ++n) {
        const int t = ts[n];
        if (t < 0 || t > schedule.t_max)
            throw ArgError("diffuse_batch: t=" + std::to_string(t) + " outside [0, t_max]");
        const double ab = schedule.alpha_bar(t);
        data_coefs[n] = std::sqrt(ab);
        const double noise_coef = std::sqrt(1.0 - ab) * schedule.sigma;
        double* np = noise.data() + int64_t(n) * per;
        for (int64_t i = 0; i < per; ++i) np[i] *= noise_coef;
    }
    return add(sample_scale(x0, data_coefs), make_const(std::move(noise)));
}

MarginalReport marginal_equivalence_check(const NoiseSchedule& schedule, int t, int n_samples,
                                          Rng& rng, double x0, int dim) {
    if (t < 1 || t > schedule.t_max)
        throw ArgError("marginal_equivalence_check: t outside [1, t_max]");
    if (int64_t(n_samples) * dim < 2) throw ArgError("marginal_equivalence_check: too few samples");
    MarginalReport rep;
    rep.t = t;
    rep.n_samples = n_samples;

    const int64_t total = int64_t(n_samples) * dim;
    std::vector<double> x(static_cast<size_t>(total), x0);
    for (int s = 1; s <= t; ++s) {
        const double keep = std::sqrt(1.0 - schedule.beta(s));
        const double nz = std::sqrt(schedule.beta(s)) * schedule.sigma;
        for (auto& v : x) v = keep * v + nz * rng.normal();
    }

    bool all_equal = true;
    double mean = 0.0;
    for (double v : x) {
        mean += v;
        all_equal = all_equal && v == x[0];
    }
    mean /= double(total);
    double var = 0.0;
    if (all_equal) {
        mean = x[0];  // exact: degenerate (sigma = 0) chains are deterministic
    } else {
        for (double v : x) var += (v - mean) * (v - mean);
        var /= double(total - 1);
    }

    const double ab = schedule.alpha_bar(t);
    rep.empirical_mean = mean;
    rep.closed_mean = std::sqrt(ab) * x0;
    rep.empirical_var = var;
    rep.closed_var = (1.0 - ab) * schedule.sigma * schedule.sigma;
    const auto rel = [](double emp, double closed) {
        const double denom = std::max(std::fabs(closed), 1e-300);
        return std::fabs(emp - closed) / denom;
    };
    rep.mean_rel_err = rel(rep.empirical_mean, rep.closed_mean);
    rep.var_rel_err = rel(rep.empirical_var, rep.closed_var);
    return rep;
}

}  // namespace diffgan
