#pragma once

#include <vector>

#include "diffgan/rng.hpp"
#include "diffgan/tape.hpp"
#include "diffgan/tensor.hpp"

namespace diffgan {

/// Forward-chain noise schedule: per-step mixing rates beta_t and their
/// running products alpha_bar_t = prod_{s<=t} (1 - beta_s). sigma scales
/// only the injected noise, never the data term.
struct NoiseSchedule {
    int t_max = 0;
    double beta_min = 0.0;
    double beta_max = 0.0;
    double sigma = 0.0;
    std::vector<double> betas;       // betas[t-1] = beta_t, t in [1, t_max]
    std::vector<double> alpha_bars;  // alpha_bars[t-1] = alpha_bar_t

    double beta(int t) const;       // t in [1, t_max]
    double alpha_bar(int t) const;  // t in [0, t_max]; alpha_bar(0) == 1
};

/// Linear beta interpolation over t_max steps.
NoiseSchedule make_schedule(int t_max, double beta_min, double beta_max, double sigma);

enum class TimestepDist { kUniform, kPriority };

inline constexpr int kTeplSize = 64;
inline constexpr int kTeplZeros = 32;

/// Adaptive chain-length controller state. tepl holds 32 zeros (no
/// diffusion) plus 32 sampled timesteps after every refresh.
struct DiffusionState {
    int t_current = 1;
    double d_target = 0.6;
    int c_step = 2;
    std::vector<int> tepl;  // kTeplSize entries
    TimestepDist p_pi = TimestepDist::kPriority;
    int t_min = 1;
    int t_max = 1;
};

DiffusionState make_diffusion_state(int t_start, double d_target, int c_step, TimestepDist p_pi,
                                    int t_min, int t_max);

/// Refreshes state.tepl: 32 zeros then 32 draws from p_pi over [1, t_current].
/// uniform: p(t) constant; priority: p(t) proportional to t.
void sample_tepl(DiffusionState& state, Rng& rng);

/// m uniform-with-replacement picks from tepl.
std::vector<int> draw_t(const DiffusionState& state, Rng& rng, int m);

/// Overfitting statistic: mean of sign(sigmoid(logit) - 0.5), sign(0) = 0.
double compute_rd(const Tensor& real_logits);

/// T <- clamp(T + sign(r_d - d_target) * C, t_min, t_max).
void update_T(DiffusionState& state, double r_d);

/// One-shot diffusion to step t via the closed-form marginal:
/// y = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) sigma eps.
/// Differentiable in x0 (eps enters as a constant leaf); t = 0 returns x0.
Var q_sample(const Var& x0, int t, const NoiseSchedule& schedule, Rng& rng);

/// Batched q_sample with one timestep per sample (x0 leading dim N).
Var diffuse_batch(const Var& x0, const std::vector<int>& ts, const NoiseSchedule& schedule,
                  Rng& rng);

/// Monte-Carlo check that composing the per-step kernel t times agrees with
/// the closed-form marginal used by q_sample.
struct MarginalReport {
    int t = 0;
    int n_samples = 0;
    double empirical_mean = 0.0, closed_mean = 0.0, mean_rel_err = 0.0;
    double empirical_var = 0.0, closed_var = 0.0, var_rel_err = 0.0;
};

MarginalReport marginal_equivalence_check(const NoiseSchedule& schedule, int t, int n_samples,
                                          Rng& rng, double x0 = 1.0, int dim = 8);

}  // namespace diffgan
