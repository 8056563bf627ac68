#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "diffgan/checkpoint.hpp"
#include "diffgan/config.hpp"
#include "diffgan/data.hpp"
#include "diffgan/diffusion.hpp"
#include "diffgan/metrics.hpp"
#include "diffgan/nets.hpp"

namespace diffgan {

/// Bias-corrected Adam over a parameter list. Parameters and moments are
/// rounded to float32 after every update so checkpoints are lossless.
struct AdamState {
    std::vector<Tensor> m, v;
    int64_t step = 0;
};

void adam_init(AdamState& state, const ParamList& params);
void adam_update(const ParamList& params, AdamState& state, double lrate, double beta1,
                 double beta2, double eps);

/// Per-iteration log row. The metric fields are present exactly on
/// evaluation iterations.
struct RunRecord {
    int64_t iter = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double r_d = 0.0;
    int t_current = 0;
    double seconds = 0.0;
    bool has_metrics = false;
    double fid_value = 0.0;
    double kid_value = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct EvalResult {
    double fid_value = 0.0;
    double kid_value = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    int n_real = 0;
    int n_fake = 0;
};

/// One adversarial training run: discriminator step, generator step, and
/// the every-4-iterations diffusion update, plus EMA, logging and
/// checkpointing. Fully deterministic given (config, dataset, seed).
class Trainer {
public:
    Trainer(const TrainConfig& cfg, const ImageDataset& dataset);

    /// Resumed training matches uninterrupted training step for step.
    Trainer(const Checkpoint& ckpt, const ImageDataset& dataset);

    /// One Algorithm-1 iteration (I: D step, II: G step, III: diffusion
    /// update when enabled and iter % 4 == 0). Throws NumericError on a
    /// non-finite loss.
    RunRecord step();

    /// Runs the remaining iterations, writing log.csv, periodic metric
    /// JSON files, snapshots and ckpt_final under out_dir. On a numeric
    /// abort a diagnostic snapshot ckpt_diag is saved before rethrowing.
    void train(const std::string& out_dir);

    Checkpoint make_checkpoint() const;
    void save(const std::string& path) const;

    /// n images from the EMA generator at the given seed.
    Tensor sample_images(int n, uint64_t seed) const;

    EvalResult evaluate(int n_samples, uint64_t sample_seed) const;

    int64_t iter() const { return iter_; }
    const TrainConfig& config() const { return cfg_; }
    const DiffusionState& diffusion_state() const { return diff_state_; }
    DiffusionState& diffusion_state() { return diff_state_; }
    int64_t step3_count() const { return step3_count_; }
    double last_g_grad_l1() const { return last_g_grad_l1_; }
    const ParamList& g_params() const { return g_params_; }
    const ParamList& d_params() const { return d_params_; }

private:
    void build_nets();
    std::vector<int> draw_timesteps(uint64_t purpose) const;
    Rng stream(uint64_t purpose) const;
    Rng stream_at(uint64_t purpose, int64_t iter) const;

    TrainConfig cfg_;
    const ImageDataset* dataset_;
    NetsConfig net_cfg_;
    std::unique_ptr<MappingNet> mapping_;
    std::unique_ptr<Generator> generator_;
    std::unique_ptr<Discriminator> discriminator_;
    std::unique_ptr<MappingNet> ema_mapping_;
    std::unique_ptr<Generator> ema_generator_;
    ParamList g_params_, d_params_, ema_mirror_params_;
    std::vector<Tensor> ema_values_;
    AdamState g_opt_, d_opt_;
    NoiseSchedule schedule_;
    DiffusionState diff_state_;
    double ema_decay_ = 0.0;
    int64_t iter_ = 0;
    int64_t step3_count_ = 0;
    double last_g_grad_l1_ = 0.0;
};

/// CSV header/row formatting shared by the trainer and the CLI.
std::string run_record_header(bool with_metrics);
std::string run_record_row(const RunRecord& rec, bool with_metrics);

/// EMA-generator samples straight from a checkpoint (no dataset needed).
Tensor sample_from_checkpoint(const Checkpoint& ckpt, int n, uint64_t seed);

/// Tiles images [n,C,R,R] (C = 1 or 3, values in [-1,1]) into a grid x grid
/// PNG, mapping [-1,1] to [0,255]. Requires n <= grid^2.
void save_sample_grid(const Tensor& images, int grid, const std::string& png_path);

}  // namespace diffgan
