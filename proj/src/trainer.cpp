#include "diffgan/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "diffgan/error.hpp"
#include "diffgan/image_io.hpp"
#include "diffgan/losses.hpp"

namespace diffgan {

namespace {

// Stream purposes; every consumer of randomness gets its own stream keyed
// by (purpose, iteration), so resume and feature toggles never shift
// other draws.
enum Purpose : uint64_t {
    kInitParams = 1,
    kZStepD = 2,
    kZStepG = 3,
    kRealIdx = 4,
    kTDrawD = 5,
    kTDrawG = 6,
    kEpsDReal = 7,
    kEpsDFake = 8,
    kEpsG = 9,
    kR1Probe = 10,
    kTeplRefresh = 11,
    kNoiseGenD = 12,
    kNoiseGenG = 13,
    kEvalZ = 14,
    kEvalNoise = 15,
    kSampleZ = 16,
    kSampleNoise = 17,
};

void quantize_params(const ParamList& params) {
    for (const auto& p : params) p.var->value.quantize_f32();
}

}  // namespace

void adam_init(AdamState& state, const ParamList& params) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
        state.m.emplace_back(p.var->value.shape());
        state.v.emplace_back(p.var->value.shape());
    }
    state.step = 0;
}

void adam_update(const ParamList& params, AdamState& state, double lrate, double beta1,
                 double beta2, double eps) {
    if (params.size() != state.m.size())
        throw DimError("adam_update: state/parameter list size mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(beta2, double(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& value = params[i].var->value;
        const Tensor& grad = params[i].var->grad;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        if (!value.same_shape(grad) || !value.same_shape(m))
            throw DimError("adam_update: shape mismatch for " + params[i].name);
        for (int64_t k = 0; k < value.numel(); ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            value[k] -= lrate * mhat / (std::sqrt(vhat) + eps);
        }
        value.quantize_f32();
        m.quantize_f32();
        v.quantize_f32();
    }
}

Rng Trainer::stream(uint64_t purpose) const { return stream_at(purpose, iter_); }

Rng Trainer::stream_at(uint64_t purpose, int64_t iter) const {
    return Rng(cfg_.seed, stream_id(purpose, static_cast<uint64_t>(iter)));
}

void Trainer::build_nets() {
    net_cfg_.arch = cfg_.arch;
    net_cfg_.zdim = cfg_.zdim;
    net_cfg_.wdim = cfg_.wdim;
    net_cfg_.map_depth = cfg_.map_depth;
    net_cfg_.img_channels = dataset_->channels;
    net_cfg_.resolution = dataset_->resolution;
    net_cfg_.base_channels = cfg_.base_channels;
    net_cfg_.fmaps = cfg_.fmaps;
    net_cfg_.modulated = cfg_.modulated;
    net_cfg_.noise_inject = cfg_.noise_inject;
    net_cfg_.mbstd_group = cfg_.mbstd_group;
    net_cfg_.t_max = cfg_.t_max;
    net_cfg_.d_feat = cfg_.d_feat;
    net_cfg_.mlp_hidden = cfg_.mlp_hidden;
    net_cfg_.mlp_layers = cfg_.mlp_layers;

    Rng init = stream_at(kInitParams, 0);
    mapping_ = std::make_unique<MappingNet>(cfg_.zdim, cfg_.wdim, cfg_.map_depth, init);
    generator_ = std::make_unique<Generator>(net_cfg_, init);
    discriminator_ = std::make_unique<Discriminator>(net_cfg_, init);

    // EMA mirror nets (weights overwritten before every use).
    Rng mirror = stream_at(kInitParams, 0);
    ema_mapping_ = std::make_unique<MappingNet>(cfg_.zdim, cfg_.wdim, cfg_.map_depth, mirror);
    ema_generator_ = std::make_unique<Generator>(net_cfg_, mirror);

    g_params_ = mapping_->params("map");
    {
        ParamList gen = generator_->params("g");
        g_params_.insert(g_params_.end(), gen.begin(), gen.end());
    }
    d_params_ = discriminator_->params("d");
    ema_mirror_params_ = ema_mapping_->params("map");
    {
        ParamList gen = ema_generator_->params("g");
        ema_mirror_params_.insert(ema_mirror_params_.end(), gen.begin(), gen.end());
    }

    quantize_params(g_params_);
    quantize_params(d_params_);
    ema_decay_ = ema_decay_from_halflife(cfg_.ema_halflife_kimg, cfg_.batch);
}

Trainer::Trainer(const TrainConfig& cfg, const ImageDataset& dataset)
    : cfg_(cfg), dataset_(&dataset) {
    validate_config(cfg_);
    if (dataset.n() < 1) throw ConfigError("trainer: empty dataset");
    if (cfg_.arch == "mlp" && dataset.resolution != 1)
        throw ConfigError("trainer: mlp arch expects a point dataset (resolution 1)");
    if (cfg_.arch == "conv" && dataset.resolution < 8)
        throw ConfigError("trainer: conv arch expects image resolution >= 8, dataset has " +
                          std::to_string(dataset.resolution));

    build_nets();
    adam_init(g_opt_, g_params_);
    adam_init(d_opt_, d_params_);
    ema_values_ = param_values(g_params_);

    schedule_ = make_schedule(cfg_.t_max, cfg_.beta_min, cfg_.beta_max, cfg_.sigma);
    diff_state_ = make_diffusion_state(cfg_.t_start, cfg_.d_target, cfg_.c_step,
                                       cfg_.p_pi == "uniform" ? TimestepDist::kUniform
                                                              : TimestepDist::kPriority,
                                       cfg_.t_min, cfg_.t_max);
    if (cfg_.diffusion_enabled) {
        Rng tepl_rng(cfg_.seed, stream_id(kTeplRefresh, ~uint64_t(0)));  // init refresh
        sample_tepl(diff_state_, tepl_rng);
    }
}

Trainer::Trainer(const Checkpoint& ckpt, const ImageDataset& dataset)
    : Trainer(ckpt.config, dataset) {
    if (ckpt.data_resolution != dataset.resolution || ckpt.data_channels != dataset.channels)
        throw ConfigError("checkpoint was trained on " + std::to_string(ckpt.data_channels) + "x" +
                          std::to_string(ckpt.data_resolution) + "x" +
                          std::to_string(ckpt.data_resolution) + " data, dataset is " +
                          std::to_string(dataset.channels) + "x" +
                          std::to_string(dataset.resolution) + "x" +
                          std::to_string(dataset.resolution));
    // overwrite freshly initialized state with the checkpoint payload
    std::vector<Tensor> g_vals, d_vals, ema_vals, gm, gv, dm, dv;
    size_t idx = 0;
    auto take = [&](size_t count, std::vector<Tensor>& dst, const char* what) {
        if (idx + count > ckpt.tensors.size())
            throw IoError(std::string("checkpoint: missing tensors for ") + what);
        for (size_t i = 0; i < count; ++i) dst.push_back(ckpt.tensors[idx++].second);
    };
    take(g_params_.size(), g_vals, "generator");
    take(d_params_.size(), d_vals, "discriminator");
    take(g_params_.size(), ema_vals, "ema");
    take(g_params_.size(), gm, "adam g.m");
    take(g_params_.size(), gv, "adam g.v");
    take(d_params_.size(), dm, "adam d.m");
    take(d_params_.size(), dv, "adam d.v");
    if (idx != ckpt.tensors.size())
        throw IoError("checkpoint: unexpected extra tensors (" +
                      std::to_string(ckpt.tensors.size() - idx) + ")");

    load_param_values(g_params_, g_vals);
    load_param_values(d_params_, d_vals);
    ema_values_ = ema_vals;
    g_opt_.m = gm;
    g_opt_.v = gv;
    d_opt_.m = dm;
    d_opt_.v = dv;
    g_opt_.step = ckpt.adam_step_g;
    d_opt_.step = ckpt.adam_step_d;
    if (ckpt.tepl.size() != kTeplSize)
        throw IoError("checkpoint: tepl must hold " + std::to_string(kTeplSize) + " entries");
    diff_state_.t_current = ckpt.t_current;
    diff_state_.tepl = ckpt.tepl;
    iter_ = ckpt.iter;
}

std::vector<int> Trainer::draw_timesteps(uint64_t purpose) const {
    if (!cfg_.diffusion_enabled) return std::vector<int>(static_cast<size_t>(cfg_.batch), 0);
    Rng rng = stream_at(purpose, iter_);
    return draw_t(diff_state_, rng, cfg_.batch);
}

RunRecord Trainer::step() {
    const auto t0 = std::chrono::steady_clock::now();
    const int m = cfg_.batch;
    RunRecord rec;
    rec.iter = iter_;

    // ---- Step I: update discriminator ----
    Var x_fake_const;
    {
        Rng zrng = stream(kZStepD);
        Var z = make_const(Tensor::randn(zrng, {m, cfg_.zdim}));
        set_params_trainable(g_params_, false);
        Rng nrng = stream(kNoiseGenD);
        Var xg = generator_->forward(mapping_->forward(z), nrng);
        set_params_trainable(g_params_, true);
        x_fake_const = make_const(xg->value);  // detach: Step I trains D only
    }

    Tensor reals({m, dataset_->channels, dataset_->resolution, dataset_->resolution});
    {
        Rng irng = stream(kRealIdx);
        const int64_t per = reals.numel() / m;
        for (int i = 0; i < m; ++i) {
            const int64_t src = irng.uniform_int(0, dataset_->n() - 1);
            std::copy_n(dataset_->images.data() + src * per, per, reals.data() + int64_t(i) * per);
        }
    }
    Var x_real = make_const(std::move(reals));

    const std::vector<int> ts_d = draw_timesteps(kTDrawD);
    Var y_real = x_real, y_fake = x_fake_const;
    if (cfg_.diffusion_enabled) {
        Rng er = stream(kEpsDReal);
        y_real = diffuse_batch(x_real, ts_d, schedule_, er);
        Rng ef = stream(kEpsDFake);
        y_fake = diffuse_batch(x_fake_const, ts_d, schedule_, ef);
    }

    Var real_logits = discriminator_->forward(y_real, ts_d);
    Var fake_logits = discriminator_->forward(y_fake, ts_d);
    Var d_loss = cfg_.loss_kind == "ns" ? d_loss_ns(real_logits, fake_logits)
                                        : d_loss_w(real_logits, fake_logits);

    const bool r1_due = cfg_.gamma > 0.0 && iter_ % cfg_.r1_interval == 0;
    if (r1_due) {
        Rng prng = stream(kR1Probe);
        auto disc_fn = [&](const Var& x) { return discriminator_->forward(x, ts_d); };
        Var pen = r1_penalty_zo(disc_fn, y_real, cfg_.gamma, cfg_.n_probes, cfg_.probe_eps, prng);
        d_loss = add(d_loss, scale(pen, double(cfg_.r1_interval)));
    }
    if (cfg_.gp_lambda > 0.0) {
        Rng prng = stream(kR1Probe);
        auto disc_fn = [&](const Var& x) { return discriminator_->forward(x, ts_d); };
        Var pen = gp_penalty_zo(disc_fn, y_real, y_fake, cfg_.gp_lambda, cfg_.n_probes,
                                cfg_.probe_eps, prng);
        d_loss = add(d_loss, pen);
    }

    rec.d_loss = d_loss->value[0];
    if (!std::isfinite(rec.d_loss))
        throw NumericError("non-finite discriminator loss at iteration " + std::to_string(iter_));
    backward(d_loss);
    adam_update(d_params_, d_opt_, cfg_.lrate, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
    zero_param_grads(d_params_);

    // ---- Step II: update generator ----
    {
        Rng zrng = stream(kZStepG);
        Var z = make_const(Tensor::randn(zrng, {m, cfg_.zdim}));
        Rng nrng = stream(kNoiseGenG);
        Var xg = generator_->forward(mapping_->forward(z), nrng);

        const std::vector<int> ts_g = draw_timesteps(kTDrawG);
        Var y_g = xg;
        if (cfg_.diffusion_enabled) {
            Rng eg = stream(kEpsG);
            y_g = diffuse_batch(xg, ts_g, schedule_, eg);
        }
        set_params_trainable(d_params_, false);
        Var logits = discriminator_->forward(y_g, ts_g);
        Var g_loss = cfg_.loss_kind == "ns"
                         ? (cfg_.loss_saturating ? g_loss_saturating(logits) : g_loss_ns(logits))
                         : g_loss_w(logits);
        rec.g_loss = g_loss->value[0];
        if (!std::isfinite(rec.g_loss))
            throw NumericError("non-finite generator loss at iteration " + std::to_string(iter_));
        backward(g_loss);
        set_params_trainable(d_params_, true);

        last_g_grad_l1_ = 0.0;
        for (const auto& p : g_params_)
            for (int64_t k = 0; k < p.var->grad.numel(); ++k)
                last_g_grad_l1_ += std::fabs(p.var->grad[k]);

        adam_update(g_params_, g_opt_, cfg_.lrate, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
        zero_param_grads(g_params_);
        ema_update(ema_values_, g_params_, ema_decay_);
        for (auto& t : ema_values_) t.quantize_f32();
    }

    // ---- Step III: update diffusion ----
    rec.r_d = compute_rd(real_logits->value);
    if (cfg_.diffusion_enabled && iter_ % 4 == 0) {
        update_T(diff_state_, rec.r_d);
        Rng trng = stream(kTeplRefresh);
        sample_tepl(diff_state_, trng);
        ++step3_count_;
    }

    rec.t_current = cfg_.diffusion_enabled ? diff_state_.t_current : 0;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++iter_;
    return rec;
}

Checkpoint Trainer::make_checkpoint() const {
    Checkpoint ckpt;
    ckpt.iter = iter_;
    ckpt.config = cfg_;
    ckpt.data_resolution = dataset_->resolution;
    ckpt.data_channels = dataset_->channels;
    ckpt.t_current = diff_state_.t_current;
    ckpt.tepl = diff_state_.tepl;
    ckpt.adam_step_g = g_opt_.step;
    ckpt.adam_step_d = d_opt_.step;
    auto push_list = [&](const std::string& prefix, const ParamList& ps) {
        for (const auto& p : ps) ckpt.tensors.emplace_back(prefix + p.name, p.var->value);
    };
    push_list("", g_params_);
    push_list("", d_params_);
    for (size_t i = 0; i < g_params_.size(); ++i)
        ckpt.tensors.emplace_back("ema." + g_params_[i].name, ema_values_[i]);
    for (size_t i = 0; i < g_params_.size(); ++i)
        ckpt.tensors.emplace_back("opt_g.m." + g_params_[i].name, g_opt_.m[i]);
    for (size_t i = 0; i < g_params_.size(); ++i)
        ckpt.tensors.emplace_back("opt_g.v." + g_params_[i].name, g_opt_.v[i]);
    for (size_t i = 0; i < d_params_.size(); ++i)
        ckpt.tensors.emplace_back("opt_d.m." + d_params_[i].name, d_opt_.m[i]);
    for (size_t i = 0; i < d_params_.size(); ++i)
        ckpt.tensors.emplace_back("opt_d.v." + d_params_[i].name, d_opt_.v[i]);
    return ckpt;
}

void Trainer::save(const std::string& path) const { save_checkpoint(make_checkpoint(), path); }

Tensor Trainer::sample_images(int n, uint64_t seed) const {
    if (n < 1) throw ArgError("sample_images: n must be positive");
    load_param_values(ema_mirror_params_, ema_values_);
    Rng zrng(seed, stream_id(kSampleZ, 0));
    Rng nrng(seed, stream_id(kSampleNoise, 0));
    Var z = make_const(Tensor::randn(zrng, {n, cfg_.zdim}));
    set_params_trainable(ema_mirror_params_, false);
    Var img = ema_generator_->forward(ema_mapping_->forward(z), nrng);
    return img->value;
}

EvalResult Trainer::evaluate(int n_samples, uint64_t sample_seed) const {
    const int n_fake = std::max(2, n_samples);
    const int n_real = std::min<int>(dataset_->n(), n_fake);

    load_param_values(ema_mirror_params_, ema_values_);
    set_params_trainable(ema_mirror_params_, false);

    const int64_t per = int64_t(dataset_->channels) * dataset_->resolution * dataset_->resolution;
    Tensor fake({n_fake, dataset_->channels, dataset_->resolution, dataset_->resolution});
    const int chunk = std::max(1, cfg_.batch);
    for (int done = 0; done < n_fake; done += chunk) {
        const int bs = std::min(chunk, n_fake - done);
        Rng zrng(sample_seed, stream_id(kEvalZ, static_cast<uint64_t>(done)));
        Rng nrng(sample_seed, stream_id(kEvalNoise, static_cast<uint64_t>(done)));
        Var z = make_const(Tensor::randn(zrng, {bs, cfg_.zdim}));
        Var img = ema_generator_->forward(ema_mapping_->forward(z), nrng);
        std::copy_n(img->value.data(), int64_t(bs) * per, fake.data() + int64_t(done) * per);
    }

    Tensor real({n_real, dataset_->channels, dataset_->resolution, dataset_->resolution});
    std::copy_n(dataset_->images.data(), int64_t(n_real) * per, real.data());

    FeatureExtractor ex;
    ex.kind = cfg_.extractor == "raw_pixels" ? FeatureExtractor::Kind::kRawPixels
                                             : FeatureExtractor::Kind::kRandomConv;
    ex.seed = cfg_.extractor_seed;
    ex.width = cfg_.feature_width;
    ex.depth = cfg_.feature_depth;

    const Tensor f_real = extract_features(real, ex);
    const Tensor f_fake = extract_features(fake, ex);

    EvalResult out;
    out.n_real = n_real;
    out.n_fake = n_fake;
    out.fid_value = fid(fit_gaussian(f_real), fit_gaussian(f_fake));
    out.kid_value = kid(f_real, f_fake, cfg_.kid_block);
    const auto pr = precision_recall(f_real, f_fake, cfg_.pr_k);
    out.precision = pr.first;
    out.recall = pr.second;
    return out;
}

std::string run_record_header(bool with_metrics) {
    std::string h = "iter,d_loss,g_loss,r_d,T,seconds";
    if (with_metrics) h += ",fid,kid,precision,recall";
    return h + "\n";
}

std::string run_record_row(const RunRecord& rec, bool with_metrics) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.6g,%d,%.3f",
                  static_cast<long long>(rec.iter), rec.d_loss, rec.g_loss, rec.r_d,
                  rec.t_current, rec.seconds);
    std::string row = buf;
    if (with_metrics) {
        if (rec.has_metrics) {
            std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%.9g,%.9g", rec.fid_value, rec.kid_value,
                          rec.precision, rec.recall);
            row += buf;
        } else {
            row += ",,,,";
        }
    }
    return row + "\n";
}

Tensor sample_from_checkpoint(const Checkpoint& ckpt, int n, uint64_t seed) {
    if (n < 1) throw ArgError("sample_from_checkpoint: n must be positive");
    const TrainConfig& cfg = ckpt.config;
    NetsConfig nc;
    nc.arch = cfg.arch;
    nc.zdim = cfg.zdim;
    nc.wdim = cfg.wdim;
    nc.map_depth = cfg.map_depth;
    nc.img_channels = ckpt.data_channels;
    nc.resolution = ckpt.data_resolution;
    nc.base_channels = cfg.base_channels;
    nc.fmaps = cfg.fmaps;
    nc.modulated = cfg.modulated;
    nc.noise_inject = cfg.noise_inject;
    nc.mbstd_group = cfg.mbstd_group;
    nc.t_max = cfg.t_max;
    nc.d_feat = cfg.d_feat;
    nc.mlp_hidden = cfg.mlp_hidden;
    nc.mlp_layers = cfg.mlp_layers;

    Rng init(0, 0);  // weights are replaced by the checkpoint payload
    MappingNet mapping(cfg.zdim, cfg.wdim, cfg.map_depth, init);
    Generator generator(nc, init);
    ParamList params = mapping.params("map");
    {
        ParamList gen = generator.params("g");
        params.insert(params.end(), gen.begin(), gen.end());
    }

    std::vector<Tensor> values;
    for (const auto& p : params) {
        const std::string want = "ema." + p.name;
        bool found = false;
        for (const auto& [name, t] : ckpt.tensors)
            if (name == want) {
                values.push_back(t);
                found = true;
                break;
            }
        if (!found) throw IoError("checkpoint: missing tensor '" + want + "'");
    }
    load_param_values(params, values);
    set_params_trainable(params, false);

    Rng zrng(seed, stream_id(kSampleZ, 0));
    Rng nrng(seed, stream_id(kSampleNoise, 0));
    Var z = make_const(Tensor::randn(zrng, {n, cfg.zdim}));
    return generator.forward(mapping.forward(z), nrng)->value;
}

void save_sample_grid(const Tensor& images, int grid, const std::string& png_path) {
    const auto& s = images.shape();
    if (s.size() != 4) throw ArgError("save_sample_grid: images must be [n,C,R,R]");
    const int n = s[0], c = s[1], r = s[2];
    if (c != 1 && c != 3)
        throw ArgError("save_sample_grid: cannot render " + std::to_string(c) + "-channel samples");
    if (grid < 1) throw ArgError("save_sample_grid: grid must be positive");
    if (n > grid * grid)
        throw ArgError("save_sample_grid: " + std::to_string(n) + " samples exceed a " +
                       std::to_string(grid) + "x" + std::to_string(grid) + " grid");

    ImageU8 out;
    out.width = grid * r;
    out.height = grid * r;
    out.channels = c;
    out.pixels.assign(size_t(out.width) * out.height * c, 0);
    const int64_t hw = int64_t(r) * r;
    for (int i = 0; i < n; ++i) {
        const int gy = i / grid, gx = i % grid;
        for (int ch = 0; ch < c; ++ch) {
            const double* src = images.data() + (int64_t(i) * c + ch) * hw;
            for (int y = 0; y < r; ++y)
                for (int x = 0; x < r; ++x) {
                    const double v = std::clamp((src[int64_t(y) * r + x] + 1.0) * 0.5, 0.0, 1.0);
                    const size_t idx =
                        (size_t(gy * r + y) * out.width + size_t(gx * r + x)) * c + ch;
                    out.pixels[idx] = static_cast<uint8_t>(std::lround(v * 255.0));
                }
        }
    }
    write_png(png_path, out);
}

void Trainer::train(const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const bool with_metrics = cfg_.eval_interval > 0;

    std::ofstream log(fs::path(out_dir) / "log.csv");
    if (!log) throw IoError("cannot write " + out_dir + "/log.csv");
    log << run_record_header(with_metrics);

    try {
        while (iter_ < cfg_.total_iters) {
            RunRecord rec = step();

            if (with_metrics &&
                (rec.iter % cfg_.eval_interval == 0 || rec.iter + 1 == cfg_.total_iters)) {
                EvalResult ev = evaluate(cfg_.eval_samples, cfg_.seed);
                rec.has_metrics = true;
                rec.fid_value = ev.fid_value;
                rec.kid_value = ev.kid_value;
                rec.precision = ev.precision;
                rec.recall = ev.recall;

                nlohmann::json mj = {{"iter", rec.iter},         {"fid", ev.fid_value},
                                     {"kid", ev.kid_value},      {"precision", ev.precision},
                                     {"recall", ev.recall},      {"n_real", ev.n_real},
                                     {"n_fake", ev.n_fake},      {"extractor", cfg_.extractor},
                                     {"seed", cfg_.seed}};
                std::ofstream mf(fs::path(out_dir) /
                                 ("metrics_" + std::to_string(rec.iter) + ".json"));
                mf << mj.dump(2) << "\n";
            }
            log << run_record_row(rec, with_metrics);

            if (cfg_.snapshot_interval > 0 && iter_ % cfg_.snapshot_interval == 0 &&
                iter_ < cfg_.total_iters) {
                char name[64];
                std::snprintf(name, sizeof(name), "ckpt_%06lld", static_cast<long long>(iter_));
                save((fs::path(out_dir) / name).string());
                if (dataset_->channels != 2) {
                    std::snprintf(name, sizeof(name), "samples_%06lld.png",
                                  static_cast<long long>(iter_));
                    save_sample_grid(sample_images(16, cfg_.seed), 4,
                                     (fs::path(out_dir) / name).string());
                }
            }
        }
    } catch (const NumericError&) {
        log.flush();
        save((fs::path(out_dir) / "ckpt_diag").string());
        throw;
    }
    log.close();
    save((fs::path(out_dir) / "ckpt_final").string());
    if (dataset_->channels != 2)
        save_sample_grid(sample_images(16, cfg_.seed), 4,
                         (fs::path(out_dir) / "samples_final.png").string());
}

}  // namespace diffgan
