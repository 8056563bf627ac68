#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "diffgan/config.hpp"
#include "diffgan/tensor.hpp"

namespace diffgan {

/// Serialized training state: named tensors (parameters, EMA copy,
/// optimizer moments) in a flat little-endian float32 blob plus a JSON
/// manifest carrying shapes, offsets, the config echo and the diffusion
/// controller state.
struct Checkpoint {
    int64_t iter = 0;
    TrainConfig config;
    int data_resolution = 0;  // dataset geometry the networks were built for
    int data_channels = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;
    int t_current = 1;
    std::vector<int> tepl;
    int64_t adam_step_g = 0;
    int64_t adam_step_d = 0;
};

/// Writes <path>.json and <path>.bin.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Throws IoError naming the offending field/tensor on version mismatch,
/// truncation, or manifest/shape disagreement.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace diffgan
