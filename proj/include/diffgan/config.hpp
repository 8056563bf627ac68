#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace diffgan {

/// Full run configuration. Desk-scale defaults; the keys mirror the
/// reference training hyperparameters (see README for the side-by-side
/// table of reference values vs these defaults).
struct TrainConfig {
    // train
    int total_iters = 2000;
    int batch = 32;
    double lrate = 0.0025;
    double adam_beta1 = 0.0;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-8;
    double ema_halflife_kimg = 20.0;
    uint64_t seed = 0;
    int eval_interval = 0;     // 0 disables periodic metrics
    int eval_samples = 1000;
    int snapshot_interval = 0; // 0 keeps only the final checkpoint
    int r1_interval = 16;      // lazy R1 cadence (D steps)

    // loss
    std::string loss_kind = "ns";  // ns | wasserstein
    bool loss_saturating = false;
    double gamma = 1.0;
    double gp_lambda = 0.0;
    double probe_eps = 1e-3;
    int n_probes = 1;

    // diffusion
    bool diffusion_enabled = false;
    double d_target = 0.6;
    int c_step = 2;
    int t_max = 1000;
    int t_min = 4;
    int t_start = 4;
    std::string p_pi = "priority";  // uniform | priority
    double sigma = 0.05;
    double beta_min = 1e-4;
    double beta_max = 0.02;

    // net
    std::string arch = "conv";  // conv | mlp
    int zdim = 64;
    int wdim = 64;
    int map_depth = 2;
    int base_channels = 64;
    double fmaps = 0.5;
    bool modulated = true;
    bool noise_inject = true;
    int mbstd_group = 8;
    int d_feat = 64;
    int mlp_hidden = 128;
    int mlp_layers = 2;

    // eval
    std::string extractor = "random_conv";  // random_conv | raw_pixels
    uint64_t extractor_seed = 1234;
    int feature_width = 32;
    int feature_depth = 2;
    int kid_block = 500;
    int pr_k = 3;
};

struct ConfigKeyDoc {
    std::string key;
    std::string value;  // current value, canonical form
    std::string doc;    // description, including the reference-paper value
};

/// Parses `section.key = value` lines with '#' comments. Unknown keys,
/// malformed lines and out-of-range values raise ConfigError naming the
/// line and key.
TrainConfig parse_config_text(const std::string& text, const TrainConfig& base = {});

TrainConfig load_config_file(const std::string& path);

/// Single key override (used by the compare matrix and tests).
void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Canonical `key = value` listing covering every key; parsing it back
/// reproduces the config exactly.
std::string config_to_text(const TrainConfig& cfg);

/// Ordered key/value/doc rows (CLI help and the checkpoint echo).
std::vector<ConfigKeyDoc> config_key_docs(const TrainConfig& cfg);

/// Key/value map used as the checkpoint config echo.
std::map<std::string, std::string> config_to_map(const TrainConfig& cfg);
TrainConfig config_from_map(const std::map<std::string, std::string>& kv);

/// Range/consistency checks shared by every entry point.
void validate_config(const TrainConfig& cfg);

}  // namespace diffgan
