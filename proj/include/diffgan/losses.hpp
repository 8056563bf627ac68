#pragma once

#include <functional>

#include "diffgan/rng.hpp"
#include "diffgan/tape.hpp"

namespace diffgan {

/// Discriminator evaluation with the timestep batch already bound.
using DiscFn = std::function<Var(const Var& x)>;

// Softplus (non-saturating) adversarial objectives. Minimizing d_loss_ns is
// equivalent to maximizing the classic minimax value with D = sigmoid(logit).
Var d_loss_ns(const Var& real_logits, const Var& fake_logits);
Var g_loss_ns(const Var& fake_logits);
/// Literal saturating generator objective E[log(1 - D(G(z)))].
Var g_loss_saturating(const Var& fake_logits);

// Wasserstein objectives on raw logits.
Var d_loss_w(const Var& real_logits, const Var& fake_logits);
Var g_loss_w(const Var& fake_logits);

/// Zero-order estimate of the R1 penalty (gamma/2) E ||grad_x D||^2 at real
/// data: finite-difference probes along random unit directions, one constant
/// probe per evaluation, differentiable w.r.t. discriminator parameters.
/// Returns an exact zero tensor when gamma == 0.
Var r1_penalty_zo(const DiscFn& d, const Var& x_real, double gamma, int n_probes, double eps,
                  Rng& rng);

/// Zero-order estimate of the gradient penalty
/// lambda * E[(||grad D(xhat)|| - 1)^2] at xhat = a*x_real + (1-a)*x_fake.
Var gp_penalty_zo(const DiscFn& d, const Var& x_real, const Var& x_fake, double lambda,
                  int n_probes, double eps, Rng& rng);

}  // namespace diffgan
