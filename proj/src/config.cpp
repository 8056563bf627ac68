#include "diffgan/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "diffgan/error.hpp"

namespace diffgan {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
    return std::string(buf, res.ptr);
}

struct KeyEntry {
    const char* key;
    const char* doc;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* begin = value.data();
    const char* end = begin + value.size();
    std::from_chars_result res;
    if constexpr (std::is_floating_point_v<T>) {
        res = std::from_chars(begin, end, out, std::chars_format::general);
    } else {
        res = std::from_chars(begin, end, out);
    }
    if (res.ec != std::errc() || res.ptr != end)
        throw ConfigError("key '" + key + "': cannot parse '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

#define INT_KEY(name, field, doc_str)                                                   \
    {name, doc_str, [](TrainConfig& c, const std::string& v) { c.field = parse_number<int>(name, v); }, \
     [](const TrainConfig& c) { return std::to_string(c.field); }}
#define U64_KEY(name, field, doc_str)                                                   \
    {name, doc_str,                                                                     \
     [](TrainConfig& c, const std::string& v) { c.field = parse_number<uint64_t>(name, v); }, \
     [](const TrainConfig& c) { return std::to_string(c.field); }}
#define DBL_KEY(name, field, doc_str)                                                   \
    {name, doc_str,                                                                     \
     [](TrainConfig& c, const std::string& v) { c.field = parse_number<double>(name, v); }, \
     [](const TrainConfig& c) { return format_double(c.field); }}
#define BOOL_KEY(name, field, doc_str)                                                  \
    {name, doc_str, [](TrainConfig& c, const std::string& v) { c.field = parse_bool(name, v); }, \
     [](const TrainConfig& c) { return c.field ? "true" : "false"; }}
#define STR_KEY(name, field, doc_str)                                                   \
    {name, doc_str, [](TrainConfig& c, const std::string& v) { c.field = v; },          \
     [](const TrainConfig& c) { return c.field; }}

const std::vector<KeyEntry>& registry() {
    static const std::vector<KeyEntry> entries = {
        INT_KEY("train.total_iters", total_iters,
                "training iterations (reference kimg=25000 at batch 64; desk default 2000)"),
        INT_KEY("train.batch", batch, "minibatch size m (reference mb=64; desk default 32)"),
        DBL_KEY("train.lrate", lrate, "Adam learning rate (reference lrate=0.0025)"),
        DBL_KEY("train.adam_beta1", adam_beta1, "Adam beta1 (reference config uses 0)"),
        DBL_KEY("train.adam_beta2", adam_beta2, "Adam beta2 (reference config uses 0.99)"),
        DBL_KEY("train.adam_eps", adam_eps, "Adam epsilon"),
        DBL_KEY("train.ema_halflife_kimg", ema_halflife_kimg,
                "generator EMA half-life in kimg (reference ema=20)"),
        U64_KEY("train.seed", seed, "global seed; every stream derives from it"),
        INT_KEY("train.eval_interval", eval_interval,
                "iterations between metric evaluations (0 = off)"),
        INT_KEY("train.eval_samples", eval_samples, "generated samples per evaluation"),
        INT_KEY("train.snapshot_interval", snapshot_interval,
                "iterations between checkpoints (0 = final only)"),
        INT_KEY("train.r1_interval", r1_interval,
                "lazy R1 cadence in D steps, weight compensated by the same factor"),

        STR_KEY("loss.kind", loss_kind, "adversarial loss: ns | wasserstein"),
        BOOL_KEY("loss.saturating", loss_saturating,
                 "use the literal saturating generator objective instead of non-saturating"),
        DBL_KEY("loss.gamma", gamma, "R1 weight (reference gamma=1; 0 disables)"),
        DBL_KEY("loss.gp_lambda", gp_lambda, "gradient-penalty weight (0 disables, default off)"),
        DBL_KEY("loss.probe_eps", probe_eps, "probe step for zero-order penalties"),
        INT_KEY("loss.n_probes", n_probes, "probes per sample for zero-order penalties"),

        BOOL_KEY("diffusion.enabled", diffusion_enabled, "forward-diffusion input augmentation"),
        DBL_KEY("diffusion.d_target", d_target, "overfitting target for r_d (reference dtarget=0.6)"),
        INT_KEY("diffusion.c_step", c_step, "T adjustment step C (unspecified in the source; default 2)"),
        INT_KEY("diffusion.t_max", t_max, "schedule length cap"),
        INT_KEY("diffusion.t_min", t_min, "adaptive T floor"),
        INT_KEY("diffusion.t_start", t_start, "initial adaptive T"),
        STR_KEY("diffusion.p_pi", p_pi,
                "tepl sampling distribution: uniform | priority (reference p_pi=priority)"),
        DBL_KEY("diffusion.sigma", sigma, "noise scale of the per-step kernel (reference noise=0.05)"),
        DBL_KEY("diffusion.beta_min", beta_min, "linear beta schedule start"),
        DBL_KEY("diffusion.beta_max", beta_max, "linear beta schedule end"),

        STR_KEY("net.arch", arch, "conv (images) | mlp (2-D point sets)"),
        INT_KEY("net.zdim", zdim, "latent dimension"),
        INT_KEY("net.wdim", wdim, "style dimension"),
        INT_KEY("net.map_depth", map_depth, "mapping layers (reference map=8; desk default 2)"),
        INT_KEY("net.base_channels", base_channels, "widest layer before the fmaps multiplier"),
        DBL_KEY("net.fmaps", fmaps, "channel multiplier (reference fmaps=0.5)"),
        BOOL_KEY("net.modulated", modulated, "style modulation + weight demodulation"),
        BOOL_KEY("net.noise_inject", noise_inject, "per-pixel noise with learned strengths"),
        INT_KEY("net.mbstd_group", mbstd_group,
                "minibatch-stddev group size, 0 disables (reference mbstd=8)"),
        INT_KEY("net.d_feat", d_feat, "discriminator pre-final feature width"),
        INT_KEY("net.mlp_hidden", mlp_hidden, "block width for the mlp arch"),
        INT_KEY("net.mlp_layers", mlp_layers, "block count for the mlp arch"),

        STR_KEY("eval.extractor", extractor, "random_conv | raw_pixels"),
        U64_KEY("eval.extractor_seed", extractor_seed, "seed of the fixed feature extractor"),
        INT_KEY("eval.feature_width", feature_width, "random_conv feature dimension"),
        INT_KEY("eval.feature_depth", feature_depth, "random_conv layers"),
        INT_KEY("eval.kid_block", kid_block, "KID block size"),
        INT_KEY("eval.pr_k", pr_k, "k for precision/recall manifolds"),
    };
    return entries;
}

#undef INT_KEY
#undef U64_KEY
#undef DBL_KEY
#undef BOOL_KEY
#undef STR_KEY

const KeyEntry* find_key(const std::string& key) {
    for (const auto& e : registry())
        if (key == e.key) return &e;
    return nullptr;
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (cfg.total_iters < 1) fail("train.total_iters must be >= 1");
    if (cfg.batch < 2) fail("train.batch must be >= 2 (minibatch stddev needs groups)");
    if (!(cfg.lrate > 0.0)) fail("train.lrate must be > 0");
    if (cfg.eval_interval < 0 || cfg.snapshot_interval < 0) fail("intervals must be >= 0");
    if (cfg.eval_samples < 2) fail("train.eval_samples must be >= 2");
    if (cfg.r1_interval < 1) fail("train.r1_interval must be >= 1");
    if (cfg.loss_kind != "ns" && cfg.loss_kind != "wasserstein")
        fail("loss.kind must be ns or wasserstein");
    if (cfg.gamma < 0.0) fail("loss.gamma must be >= 0");
    if (cfg.gp_lambda < 0.0) fail("loss.gp_lambda must be >= 0");
    if (!(cfg.probe_eps > 0.0)) fail("loss.probe_eps must be > 0");
    if (cfg.n_probes < 1) fail("loss.n_probes must be >= 1");
    if (!(cfg.d_target > 0.0 && cfg.d_target < 1.0)) fail("diffusion.d_target must lie in (0,1)");
    if (cfg.c_step < 1) fail("diffusion.c_step must be >= 1");
    if (cfg.t_max < 1) fail("diffusion.t_max must be >= 1");
    if (cfg.t_min < 1 || cfg.t_min > cfg.t_max) fail("need 1 <= diffusion.t_min <= t_max");
    if (cfg.t_start < cfg.t_min || cfg.t_start > cfg.t_max)
        fail("diffusion.t_start must lie in [t_min, t_max]");
    if (cfg.p_pi != "uniform" && cfg.p_pi != "priority")
        fail("diffusion.p_pi must be uniform or priority");
    if (!(cfg.sigma > 0.0)) fail("diffusion.sigma must be > 0");
    if (!(cfg.beta_min > 0.0 && cfg.beta_min <= cfg.beta_max && cfg.beta_max < 1.0))
        fail("need 0 < diffusion.beta_min <= beta_max < 1");
    if (cfg.arch != "conv" && cfg.arch != "mlp") fail("net.arch must be conv or mlp");
    if (cfg.zdim < 1 || cfg.wdim < 1) fail("net dimensions must be positive");
    if (cfg.map_depth < 0 || cfg.map_depth > 8) fail("net.map_depth must lie in [0, 8]");
    if (cfg.map_depth == 0 && cfg.zdim != cfg.wdim) fail("net.map_depth=0 requires zdim == wdim");
    if (cfg.base_channels < 8) fail("net.base_channels must be >= 8");
    if (!(cfg.fmaps > 0.0 && cfg.fmaps <= 2.0)) fail("net.fmaps must lie in (0, 2]");
    if (cfg.mbstd_group < 0) fail("net.mbstd_group must be >= 0");
    if (cfg.d_feat < 1 || cfg.mlp_hidden < 1 || cfg.mlp_layers < 1) fail("net widths must be positive");
    if (cfg.extractor != "random_conv" && cfg.extractor != "raw_pixels")
        fail("eval.extractor must be random_conv or raw_pixels");
    if (cfg.feature_width < 1 || cfg.feature_depth < 1) fail("eval feature settings must be positive");
    if (cfg.kid_block < 2) fail("eval.kid_block must be >= 2");
    if (cfg.pr_k < 1) fail("eval.pr_k must be >= 1");
}

TrainConfig parse_config_text(const std::string& text, const TrainConfig& base) {
    TrainConfig cfg = base;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const KeyEntry* entry = find_key(key);
        if (!entry)
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        try {
            entry->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    validate_config(cfg);
    return cfg;
}

TrainConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
    const KeyEntry* entry = find_key(key);
    if (!entry) throw ConfigError("unknown key '" + key + "'");
    entry->set(cfg, value);
    validate_config(cfg);
}

std::string config_to_text(const TrainConfig& cfg) {
    std::string out;
    for (const auto& e : registry()) {
        out += e.key;
        out += " = ";
        out += e.get(cfg);
        out += "\n";
    }
    return out;
}

std::vector<ConfigKeyDoc> config_key_docs(const TrainConfig& cfg) {
    std::vector<ConfigKeyDoc> out;
    for (const auto& e : registry()) out.push_back({e.key, e.get(cfg), e.doc});
    return out;
}

std::map<std::string, std::string> config_to_map(const TrainConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& e : registry()) out[e.key] = e.get(cfg);
    return out;
}

TrainConfig config_from_map(const std::map<std::string, std::string>& kv) {
    TrainConfig cfg;
    for (const auto& [key, value] : kv) {
        const KeyEntry* entry = find_key(key);
        if (!entry) throw ConfigError("checkpoint config echo: unknown key '" + key + "'");
        entry->set(cfg, value);
    }
    validate_config(cfg);
    return cfg;
}

}  // namespace diffgan
