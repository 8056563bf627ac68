#include "diffgan/nets.hpp"

#include <cmath>

#include "diffgan/error.hpp"

namespace diffgan {

namespace {

Var dense_param(int in_dim, int out_dim, Rng& rng) {
    Tensor w = Tensor::randn(rng, {in_dim, out_dim});
    const double s = 1.0 / std::sqrt(double(in_dim));
    for (auto& v : w.vec()) v *= s;
    return make_param(std::move(w));
}

Var conv_param(int out_ch, int in_ch, int k, Rng& rng) {
    Tensor w = Tensor::randn(rng, {out_ch, in_ch, k, k});
    const double s = 1.0 / std::sqrt(double(in_ch) * k * k);
    for (auto& v : w.vec()) v *= s;
    return make_param(std::move(w));
}

Var zeros_param(const std::vector<int>& shape) { return make_param(Tensor(shape)); }

// Channel plan: widest at the base resolution, halved per doubling, floor 8.
std::vector<int> channel_plan(int base_res, int resolution, int base_channels, double fmaps) {
    int levels = 0;
    for (int r = base_res; r < resolution; r *= 2) ++levels;
    std::vector<int> chans(static_cast<size_t>(levels) + 1);
    int ch = std::max(8, static_cast<int>(std::lround(base_channels * fmaps)));
    for (int i = 0; i <= levels; ++i) {
        chans[static_cast<size_t>(i)] = ch;
        ch = std::max(8, ch / 2);
    }
    return chans;
}

int pick_base_res(int resolution) {
    int r = resolution;
    while (r > 4 && r % 2 == 0) r /= 2;
    if (r > 7) throw ConfigError("resolution " + std::to_string(resolution) +
                                 " cannot be reduced to a base grid of 7 or less by halving");
    return r;
}

}  // namespace

std::vector<Tensor> param_values(const ParamList& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.var->value);
    return out;
}

void load_param_values(const ParamList& params, const std::vector<Tensor>& values) {
    if (params.size() != values.size())
        throw DimError("load_param_values: count mismatch " + std::to_string(params.size()) +
                       " vs " + std::to_string(values.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].var->value.same_shape(values[i]))
            throw DimError("load_param_values: shape mismatch for " + params[i].name);
        params[i].var->value = values[i];
    }
}

void zero_param_grads(const ParamList& params) {
    for (const auto& p : params) p.var->grad.fill(0.0);
}

void set_params_trainable(const ParamList& params, bool trainable) {
    for (const auto& p : params) p.var->requires_grad = trainable;
}

// ---- MappingNet ----

MappingNet::MappingNet(int zdim, int wdim, int depth, Rng& rng)
    : zdim_(zdim), wdim_(wdim), depth_(depth) {
    if (depth < 0) throw ConfigError("mapping depth must be >= 0");
    if (depth == 0 && zdim != wdim)
        throw ConfigError("mapping depth 0 requires zdim == wdim");
    for (int i = 0; i < depth; ++i) {
        const int in = i == 0 ? zdim : wdim;
        weights_.push_back(dense_param(in, wdim, rng));
        biases_.push_back(zeros_param({wdim}));
    }
}

Var MappingNet::forward(const Var& z) const {
    if (z->value.ndim() != 2 || z->value.dim(1) != zdim_)
        throw DimError("mapping_forward: expected [N," + std::to_string(zdim_) + "], got " +
                       z->value.shape_str());
    Var x = z;
    for (int i = 0; i < depth_; ++i)
        x = leaky_relu(bias_add(matmul(x, weights_[static_cast<size_t>(i)]),
                                biases_[static_cast<size_t>(i)]),
                       0.2);
    return x;
}

ParamList MappingNet::params(const std::string& prefix) const {
    ParamList out;
    for (int i = 0; i < depth_; ++i) {
        out.push_back({prefix + ".fc" + std::to_string(i) + ".w", weights_[static_cast<size_t>(i)]});
        out.push_back({prefix + ".fc" + std::to_string(i) + ".b", biases_[static_cast<size_t>(i)]});
    }
    return out;
}

// ---- modulated conv ----

ModulatedConvLayer make_modulated_conv(int in_ch, int out_ch, int kernel, int pad, int wdim,
                                       Rng& rng) {
    ModulatedConvLayer layer;
    layer.kernel = conv_param(out_ch, in_ch, kernel, rng);
    layer.style_w = dense_param(wdim, in_ch, rng);
    layer.style_b = make_param(Tensor::ones({in_ch}));  // styles start at 1
    layer.pad = pad;
    return layer;
}

Var modulated_conv_forward(const Var& x, const Var& style, const ModulatedConvLayer& layer) {
    if (!style->value.all_finite()) throw NumericError("modulated_conv: non-finite style");
    Var s = bias_add(matmul(style, layer.style_w), layer.style_b);  // [N, C]
    Var scaled = channel_scale(x, s);
    Var out = conv2d(scaled, layer.kernel, 1, layer.pad);
    if (!layer.demodulate) return out;

    // demod coefficient 1/sqrt(sum_{c,kh,kw} (w_oc s_c)^2 + eps), per (n, o)
    const auto& ks = layer.kernel->value.shape();
    const int o = ks[0], c = ks[1], kk = ks[2] * ks[3];
    Var k2 = mul(layer.kernel, layer.kernel);
    Var ksum = reshape(matmul(reshape(k2, {o * c, kk}), make_const(Tensor::ones({kk, 1}))),
                       {o, c});                       // [O, C] kernel energies
    Var d2 = matmul(mul(s, s), transpose2d(ksum));    // [N, O]
    Var dcoef = rsqrt_op(add_scalar(d2, layer.eps));
    return channel_scale(out, dcoef);
}

// ---- Generator ----

Generator::Generator(const NetsConfig& cfg, Rng& rng) : cfg_(cfg) {
    const bool mlp = cfg.arch == "mlp";
    if (!mlp && cfg.arch != "conv") throw ConfigError("net arch must be conv or mlp");

    base_res_ = mlp ? cfg.resolution : pick_base_res(cfg.resolution);
    if (mlp && cfg.resolution != 1) throw ConfigError("mlp arch expects resolution 1");

    if (mlp) {
        chans_.assign(static_cast<size_t>(cfg.mlp_layers) + 1, cfg.mlp_hidden);
    } else {
        chans_ = channel_plan(base_res_, cfg.resolution, cfg.base_channels, cfg.fmaps);
    }

    head_w_ = dense_param(cfg.wdim, chans_[0] * base_res_ * base_res_, rng);
    head_b_ = zeros_param({chans_[0] * base_res_ * base_res_});

    const int k = mlp ? 1 : 3;
    const int pad = mlp ? 0 : 1;
    const size_t n_blocks = chans_.size() - 1;
    for (size_t i = 0; i < n_blocks; ++i) {
        Block blk;
        blk.upsample = !mlp;
        blk.out_ch = chans_[i + 1];
        blk.conv = make_modulated_conv(chans_[i], chans_[i + 1], k, pad, cfg.wdim, rng);
        blk.plain_bias = zeros_param({chans_[i + 1]});
        blk.noise_strength = zeros_param({chans_[i + 1]});
        blk.bias = zeros_param({chans_[i + 1]});
        blocks_.push_back(std::move(blk));
    }
    to_img_ = make_modulated_conv(chans_.back(), cfg.img_channels, 1, 0, cfg.wdim, rng);
    to_img_.demodulate = false;
    to_img_bias_ = zeros_param({cfg.img_channels});
}

Var Generator::forward(const Var& w, Rng& noise_rng) const {
    if (w->value.ndim() != 2 || w->value.dim(1) != cfg_.wdim)
        throw DimError("generator_forward: style must be [N," + std::to_string(cfg_.wdim) +
                       "], got " + w->value.shape_str());
    const int n = w->value.dim(0);

    Var x = leaky_relu(bias_add(matmul(w, head_w_), head_b_), 0.2);
    x = reshape(x, {n, chans_[0], base_res_, base_res_});

    int res = base_res_;
    for (const auto& blk : blocks_) {
        if (blk.upsample) {
            x = upsample2x(x);
            res *= 2;
        }
        if (cfg_.modulated) {
            x = modulated_conv_forward(x, w, blk.conv);
        } else {
            x = channel_bias(conv2d(x, blk.conv.kernel, 1, blk.conv.pad), blk.plain_bias);
        }
        if (cfg_.noise_inject) {
            Tensor noise = Tensor::randn(noise_rng, {n, blk.out_ch, res, res});
            x = add(x, channel_scale_shared(make_const(std::move(noise)), blk.noise_strength));
        }
        x = leaky_relu(channel_bias(x, blk.bias), 0.2);
    }

    Var img;
    if (cfg_.modulated) {
        img = modulated_conv_forward(x, w, to_img_);
    } else {
        img = conv2d(x, to_img_.kernel, 1, 0);
    }
    return tanh_op(channel_bias(img, to_img_bias_));
}

ParamList Generator::params(const std::string& prefix) const {
    ParamList out;
    out.push_back({prefix + ".head.w", head_w_});
    out.push_back({prefix + ".head.b", head_b_});
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const std::string bp = prefix + ".block" + std::to_string(i);
        const auto& blk = blocks_[i];
        out.push_back({bp + ".conv.w", blk.conv.kernel});
        if (cfg_.modulated) {
            out.push_back({bp + ".style.w", blk.conv.style_w});
            out.push_back({bp + ".style.b", blk.conv.style_b});
        } else {
            out.push_back({bp + ".conv.b", blk.plain_bias});
        }
        if (cfg_.noise_inject) out.push_back({bp + ".noise", blk.noise_strength});
        out.push_back({bp + ".bias", blk.bias});
    }
    out.push_back({prefix + ".to_img.w", to_img_.kernel});
    if (cfg_.modulated) {
        out.push_back({prefix + ".to_img.style.w", to_img_.style_w});
        out.push_back({prefix + ".to_img.style.b", to_img_.style_b});
    }
    out.push_back({prefix + ".to_img.b", to_img_bias_});
    return out;
}

// ---- Discriminator ----

Discriminator::Discriminator(const NetsConfig& cfg, Rng& rng) : cfg_(cfg) {
    const bool mlp = cfg.arch == "mlp";
    base_res_ = mlp ? cfg.resolution : pick_base_res(cfg.resolution);

    std::vector<int> chans;
    if (mlp) {
        chans.assign(static_cast<size_t>(cfg.mlp_layers) + 1, cfg.mlp_hidden);
    } else {
        chans = channel_plan(base_res_, cfg.resolution, cfg.base_channels, cfg.fmaps);
    }
    // walk from the output resolution down to the base
    const int k = mlp ? 1 : 3;
    const int pad = mlp ? 0 : 1;

    frgb_w_ = conv_param(chans.back(), cfg.img_channels, 1, rng);
    frgb_b_ = zeros_param({chans.back()});

    for (size_t i = chans.size() - 1; i > 0; --i) {
        Block blk;
        blk.conv1_w = conv_param(chans[i], chans[i], k, rng);
        blk.conv1_b = zeros_param({chans[i]});
        blk.conv2_w = conv_param(chans[i - 1], chans[i], k, rng);
        blk.conv2_b = zeros_param({chans[i - 1]});
        blk.stride = mlp ? 1 : 2;
        blocks_.push_back(std::move(blk));
    }

    const int base_ch = chans[0];
    const int mb_extra = cfg.mbstd_group > 0 ? 1 : 0;
    post_w_ = conv_param(base_ch, base_ch + mb_extra, k, rng);
    post_b_ = zeros_param({base_ch});

    const int flat = base_ch * base_res_ * base_res_;
    dense1_w_ = dense_param(flat, cfg.d_feat, rng);
    dense1_b_ = zeros_param({cfg.d_feat});

    const int t_hidden = 32;
    t_w1_ = dense_param(1, t_hidden, rng);
    t_b1_ = zeros_param({t_hidden});
    t_w2_ = dense_param(t_hidden, cfg.d_feat, rng);
    t_b2_ = zeros_param({cfg.d_feat});

    dense2_w_ = dense_param(cfg.d_feat, 1, rng);
    dense2_b_ = zeros_param({1});
}

Var Discriminator::forward(const Var& y, const std::vector<int>& ts) const {
    const auto& s = y->value.shape();
    if (s.size() != 4 || s[1] != cfg_.img_channels || s[2] != cfg_.resolution ||
        s[3] != cfg_.resolution)
        throw DimError("discriminator_forward: expected [N," + std::to_string(cfg_.img_channels) +
                       "," + std::to_string(cfg_.resolution) + "," +
                       std::to_string(cfg_.resolution) + "], got " + y->value.shape_str());
    const int n = s[0];
    if (static_cast<int>(ts.size()) != n)
        throw DimError("discriminator_forward: need one timestep per sample");
    for (int t : ts)
        if (t < 0 || t > cfg_.t_max)
            throw ArgError("discriminator_forward: t=" + std::to_string(t) + " outside [0, t_max]");

    Var x = leaky_relu(channel_bias(conv2d(y, frgb_w_, 1, 0), frgb_b_), 0.2);
    const int pad = cfg_.arch == "mlp" ? 0 : 1;
    for (const auto& blk : blocks_) {
        x = leaky_relu(channel_bias(conv2d(x, blk.conv1_w, 1, pad), blk.conv1_b), 0.2);
        x = leaky_relu(channel_bias(conv2d(x, blk.conv2_w, blk.stride, pad), blk.conv2_b), 0.2);
    }
    if (cfg_.mbstd_group > 0) x = minibatch_stddev(x, std::min(cfg_.mbstd_group, n));
    x = leaky_relu(channel_bias(conv2d(x, post_w_, 1, pad), post_b_), 0.2);

    const auto& xs = x->value.shape();
    Var flat = reshape(x, {n, xs[1] * xs[2] * xs[3]});
    Var h = bias_add(matmul(flat, dense1_w_), dense1_b_);

    Tensor tn({n, 1});
    for (int i = 0; i < n; ++i) tn[i] = double(ts[static_cast<size_t>(i)]) / double(cfg_.t_max);
    Var te = bias_add(matmul(leaky_relu(bias_add(matmul(make_const(std::move(tn)), t_w1_), t_b1_), 0.2),
                             t_w2_),
                      t_b2_);
    h = leaky_relu(add(h, te), 0.2);
    return bias_add(matmul(h, dense2_w_), dense2_b_);
}

ParamList Discriminator::params(const std::string& prefix) const {
    ParamList out;
    out.push_back({prefix + ".frgb.w", frgb_w_});
    out.push_back({prefix + ".frgb.b", frgb_b_});
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const std::string bp = prefix + ".block" + std::to_string(i);
        out.push_back({bp + ".conv1.w", blocks_[i].conv1_w});
        out.push_back({bp + ".conv1.b", blocks_[i].conv1_b});
        out.push_back({bp + ".conv2.w", blocks_[i].conv2_w});
        out.push_back({bp + ".conv2.b", blocks_[i].conv2_b});
    }
    out.push_back({prefix + ".post.w", post_w_});
    out.push_back({prefix + ".post.b", post_b_});
    out.push_back({prefix + ".dense1.w", dense1_w_});
    out.push_back({prefix + ".dense1.b", dense1_b_});
    out.push_back({prefix + ".temb.fc0.w", t_w1_});
    out.push_back({prefix + ".temb.fc0.b", t_b1_});
    out.push_back({prefix + ".temb.fc1.w", t_w2_});
    out.push_back({prefix + ".temb.fc1.b", t_b2_});
    out.push_back({prefix + ".dense2.w", dense2_w_});
    out.push_back({prefix + ".dense2.b", dense2_b_});
    return out;
}

void ema_update(std::vector<Tensor>& ema, const ParamList& live, double decay) {
    if (decay < 0.0 || decay >= 1.0) throw ArgError("ema_update: decay must lie in [0,1)");
    if (ema.size() != live.size())
        throw DimError("ema_update: parameter list size mismatch");
    for (size_t i = 0; i < ema.size(); ++i) {
        const Tensor& lv = live[i].var->value;
        Tensor& ev = ema[i];
        if (!ev.same_shape(lv)) throw DimError("ema_update: shape mismatch for " + live[i].name);
        for (int64_t k = 0; k < ev.numel(); ++k)
            ev[k] = decay * ev[k] + (1.0 - decay) * lv[k];
    }
}

double ema_decay_from_halflife(double halflife_kimg, int batch) {
    if (halflife_kimg <= 0.0) return 0.0;
    return std::pow(0.5, double(batch) / (halflife_kimg * 1000.0));
}

}  // namespace diffgan
