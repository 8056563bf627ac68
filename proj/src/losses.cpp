#include "diffgan/losses.hpp"

#include <cmath>

#include "diffgan/error.hpp"

namespace diffgan {

Var d_loss_ns(const Var& real_logits, const Var& fake_logits) {
    return add(reduce_mean(softplus(scale(real_logits, -1.0))), reduce_mean(softplus(fake_logits)));
}

Var g_loss_ns(const Var& fake_logits) {
    return reduce_mean(softplus(scale(fake_logits, -1.0)));
}

Var g_loss_saturating(const Var& fake_logits) {
    // E[log(1 - sigmoid(l))] == -E[softplus(l)]
    return scale(reduce_mean(softplus(fake_logits)), -1.0);
}

Var d_loss_w(const Var& real_logits, const Var& fake_logits) {
    return sub(reduce_mean(fake_logits), reduce_mean(real_logits));
}

Var g_loss_w(const Var& fake_logits) { return scale(reduce_mean(fake_logits), -1.0); }

namespace {

// Per-sample unit directions with the same shape as x.
Tensor unit_probe(const Tensor& x, Rng& rng) {
    Tensor u = Tensor::randn(rng, x.shape());
    const int n = x.dim(0);
    const int64_t per = x.numel() / n;
    for (int i = 0; i < n; ++i) {
        double* p = u.data() + int64_t(i) * per;
        double norm2 = 0.0;
        for (int64_t k = 0; k < per; ++k) norm2 += p[k] * p[k];
        const double inv = 1.0 / std::sqrt(norm2 + 1e-300);
        for (int64_t k = 0; k < per; ++k) p[k] *= inv;
    }
    return u;
}

// Mean over samples and probes of dim * ((D(x + eps u) - D(x)) / eps)^2,
// shaped [N,1] per-sample when per_sample, else reduced to a scalar.
Var probe_sq_mean(const DiscFn& d, const Var& x, int n_probes, double eps, Rng& rng,
                  bool per_sample) {
    if (n_probes < 1) throw ArgError("probe penalty: n_probes must be >= 1");
    if (!(eps > 0.0)) throw ArgError("probe penalty: eps must be > 0");
    const int n = x->value.dim(0);
    const double dim = double(x->value.numel() / n);
    Var base = d(x);
    Var acc;
    for (int p = 0; p < n_probes; ++p) {
        Tensor u = unit_probe(x->value, rng);
        for (auto& v : u.vec()) v *= eps;
        Var shifted = d(add(x, make_const(std::move(u))));
        Var diff = scale(sub(shifted, base), 1.0 / eps);
        Var sq = scale(mul(diff, diff), dim);
        acc = acc ? add(acc, sq) : sq;
    }
    Var mean_probes = scale(acc, 1.0 / n_probes);  // [N,1]
    return per_sample ? mean_probes : reduce_mean(mean_probes);
}

}  // namespace

Var r1_penalty_zo(const DiscFn& d, const Var& x_real, double gamma, int n_probes, double eps,
                  Rng& rng) {
    if (gamma < 0.0) throw ArgError("r1_penalty_zo: gamma must be >= 0");
    if (gamma == 0.0) return make_const(Tensor::scalar(0.0));
    Var est = probe_sq_mean(d, x_real, n_probes, eps, rng, /*per_sample=*/false);
    return scale(est, gamma / 2.0);
}

Var gp_penalty_zo(const DiscFn& d, const Var& x_real, const Var& x_fake, double lambda,
                  int n_probes, double eps, Rng& rng) {
    if (lambda < 0.0) throw ArgError("gp_penalty_zo: lambda must be >= 0");
    if (lambda == 0.0) return make_const(Tensor::scalar(0.0));
    if (!x_real->value.same_shape(x_fake->value))
        throw DimError("gp_penalty_zo: real/fake shape mismatch");

    const int n = x_real->value.dim(0);
    const int64_t per = x_real->value.numel() / n;
    Tensor xhat(x_real->value.shape());
    for (int i = 0; i < n; ++i) {
        const double a = rng.uniform();
        const double* xr = x_real->value.data() + int64_t(i) * per;
        const double* xf = x_fake->value.data() + int64_t(i) * per;
        double* xh = xhat.data() + int64_t(i) * per;
        for (int64_t k = 0; k < per; ++k) xh[k] = a * xr[k] + (1.0 - a) * xf[k];
    }
    Var interp = make_const(std::move(xhat));
    Var norm2 = probe_sq_mean(d, interp, n_probes, eps, rng, /*per_sample=*/true);  // [N,1]
    Var norm = sqrt_op(add_scalar(norm2, 1e-12));
    Var dev = add_scalar(norm, -1.0);
    return scale(reduce_mean(mul(dev, dev)), lambda);
}

}  // namespace diffgan
