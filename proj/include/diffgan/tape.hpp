#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "diffgan/tensor.hpp"

namespace diffgan {

class TapeVar;
using Var = std::shared_ptr<TapeVar>;

/// One node of the reverse-mode tape: a value, its gradient accumulator,
/// links to the antecedent nodes and the backward rule recorded when the
/// node was built. Graphs are DAGs by construction; backward() visits each
/// node exactly once in reverse topological order.
///
/// Gradients accumulate across backward() calls until zero_grad(); the
/// trainer relies on this for lazily scheduled regularizers.
class TapeVar {
public:
    Tensor value;
    Tensor grad;  // same shape as value, starts at zero
    std::vector<Var> parents;
    std::function<void(TapeVar&)> backward_fn;  // empty for leaves
    const char* rule = "leaf";
    bool requires_grad = false;
};

/// Trainable leaf (participates in gradients).
Var make_param(Tensor value);
/// Constant leaf (no gradient is ever propagated into it).
Var make_const(Tensor value);

void zero_grad(const Var& v);

/// Reverse-mode sweep from a scalar root. Accumulates into .grad.
void backward(const Var& root);

// ---- elementwise / arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var tanh_op(const Var& a);
Var sigmoid(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.2);
Var softplus(const Var& a);
Var sqrt_op(const Var& a);   // domain: value > 0
Var rsqrt_op(const Var& a);  // domain: value > 0

// ---- linear algebra / structure ----
Var matmul(const Var& a, const Var& b);
Var transpose2d(const Var& a);
Var reshape(const Var& a, const std::vector<int>& shape);
Var concat(const Var& a, const Var& b, int axis);
Var conv2d(const Var& input, const Var& kernel, int stride, int pad);
Var upsample2x(const Var& a);

// ---- reductions ----
Var sum(const Var& a);
Var reduce_mean(const Var& a);

// ---- broadcast helpers (the only broadcasting forms supported) ----
/// x [N,F] + b [F]
Var bias_add(const Var& x, const Var& b);
/// x [N,C,H,W] + b [C]
Var channel_bias(const Var& x, const Var& b);
/// x [N,C,H,W] (or [N,C]) scaled per sample and channel by s [N,C]
Var channel_scale(const Var& x, const Var& s);
/// x [N,C,H,W] scaled per channel by s [C], shared across the batch
Var channel_scale_shared(const Var& x, const Var& s);
/// x [N,...] scaled per sample by the constant coefficient coeffs[n]
Var sample_scale(const Var& x, const std::vector<double>& coeffs);

/// Appends one channel holding the per-group standard deviation statistic:
/// groups of group_size consecutive samples, std over the group per
/// (c,h,w), averaged over (c,h,w). group_size is clipped to the batch and
/// reduced to a divisor of it.
Var minibatch_stddev(const Var& x, int group_size);

/// Max over coordinates of |AD - central FD| / max(1, |FD|) for the scalar
/// function f at x. f must be pure (same Var in, same value out).
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps);

}  // namespace diffgan
