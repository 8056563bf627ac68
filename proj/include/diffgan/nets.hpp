#pragma once

#include <string>
#include <utility>
#include <vector>

#include "diffgan/rng.hpp"
#include "diffgan/tape.hpp"

namespace diffgan {

/// Network shape configuration. "conv" is the image architecture
/// (upsampling generator blocks / downsampling discriminator blocks);
/// "mlp" runs the same blocks at 1x1 resolution with 1x1 kernels, which is
/// a plain dense stack used for 2-D point datasets.
struct NetsConfig {
    std::string arch = "conv";  // conv | mlp
    int zdim = 64;
    int wdim = 64;
    int map_depth = 2;      // 0 disables the mapping network (then wdim == zdim)
    int img_channels = 1;   // output channels (2 for point sets)
    int resolution = 32;    // output resolution (1 for point sets)
    int base_channels = 64; // widest layer before the fmaps multiplier
    double fmaps = 0.5;
    bool modulated = true;   // style modulation + weight demodulation
    bool noise_inject = true;
    int mbstd_group = 8;     // 0 disables minibatch stddev
    int t_max = 1000;        // timestep normalization for the discriminator
    int d_feat = 64;         // discriminator pre-final feature width
    int mlp_hidden = 128;    // block width when arch == mlp
    int mlp_layers = 2;      // block count when arch == mlp
};

struct ParamRef {
    std::string name;
    Var var;
};
using ParamList = std::vector<ParamRef>;

std::vector<Tensor> param_values(const ParamList& params);
void load_param_values(const ParamList& params, const std::vector<Tensor>& values);
void zero_param_grads(const ParamList& params);
/// Toggle gradient participation (used to freeze D during the G step).
void set_params_trainable(const ParamList& params, bool trainable);

/// z -> style MLP with leaky_relu; depth 0 is the identity.
class MappingNet {
public:
    MappingNet(int zdim, int wdim, int depth, Rng& rng);
    Var forward(const Var& z) const;
    ParamList params(const std::string& prefix) const;
    int depth() const { return depth_; }

private:
    int zdim_, wdim_, depth_;
    std::vector<Var> weights_, biases_;
};

/// Style-modulated convolution with weight demodulation, computed in the
/// input-scale / output-rescale form: x is scaled per input channel by the
/// affine style, convolved with the base kernel, then rescaled per output
/// channel by 1/sqrt(sum (w s)^2 + eps).
struct ModulatedConvLayer {
    Var kernel;            // [O, C, k, k]
    Var style_w, style_b;  // affine wdim -> C, bias initialized to 1
    int pad = 0;
    bool demodulate = true;
    double eps = 1e-8;
};

ModulatedConvLayer make_modulated_conv(int in_ch, int out_ch, int kernel, int pad, int wdim,
                                       Rng& rng);

/// x [N,C,H,W], style [N,wdim] -> [N,O,H',W'] (stride 1).
Var modulated_conv_forward(const Var& x, const Var& style, const ModulatedConvLayer& layer);

class Generator {
public:
    Generator(const NetsConfig& cfg, Rng& rng);

    /// w is the mapping output [N, wdim]; noise_rng feeds the per-block
    /// injected noise. Output [N, img_channels, R, R] in [-1, 1].
    Var forward(const Var& w, Rng& noise_rng) const;

    ParamList params(const std::string& prefix) const;
    const NetsConfig& config() const { return cfg_; }
    int base_resolution() const { return base_res_; }

private:
    struct Block {
        bool upsample = false;
        ModulatedConvLayer conv;
        Var plain_bias;       // used when modulation is off
        Var noise_strength;   // [out_ch]
        Var bias;             // [out_ch]
        int out_ch = 0;
    };

    NetsConfig cfg_;
    int base_res_ = 0;
    std::vector<int> chans_;  // channel plan, base level first
    Var head_w_, head_b_;
    std::vector<Block> blocks_;
    ModulatedConvLayer to_img_;
    Var to_img_bias_;
};

class Discriminator {
public:
    Discriminator(const NetsConfig& cfg, Rng& rng);

    /// y [N, img_channels, R, R]; one timestep per sample, each in [0, t_max].
    Var forward(const Var& y, const std::vector<int>& ts) const;

    ParamList params(const std::string& prefix) const;
    const NetsConfig& config() const { return cfg_; }

private:
    struct Block {
        Var conv1_w, conv1_b;  // keep-resolution conv
        Var conv2_w, conv2_b;  // stride-2 downsample (stride 1 for mlp)
        int stride = 2;
    };

    NetsConfig cfg_;
    int base_res_ = 0;
    Var frgb_w_, frgb_b_;
    std::vector<Block> blocks_;
    Var post_w_, post_b_;  // conv after minibatch stddev
    Var dense1_w_, dense1_b_;
    Var t_w1_, t_b1_, t_w2_, t_b2_;  // timestep embedding MLP
    Var dense2_w_, dense2_b_;
};

/// ema <- decay * ema + (1 - decay) * live, elementwise over the lists.
void ema_update(std::vector<Tensor>& ema, const ParamList& live, double decay);

/// Half-life (in kimg) to per-step decay at the given batch size.
double ema_decay_from_halflife(double halflife_kimg, int batch);

}  // namespace diffgan
