#pragma once

#include <string>
#include <vector>

#include "diffgan/rng.hpp"
#include "diffgan/tensor.hpp"

namespace diffgan {

/// In-memory dataset: images [n, C, R, R] with values in [-1, 1].
/// Labels index into classes and exist only for balancing and reporting;
/// training is unconditional.
struct ImageDataset {
    Tensor images;
    std::vector<int> labels;
    std::vector<std::string> classes;
    int resolution = 0;
    int channels = 0;
    std::string provenance;

    int n() const { return images.numel() == 0 ? 0 : images.dim(0); }
};

struct AugmentConfig {
    double crop_min = 0.8;  // random square crop fraction drawn from [crop_min, 1]
    double hflip_p = 0.5;
    double vflip_p = 0.5;
    double hue_deg = 30.0;     // rotation range (3-channel images only)
    double brightness = 0.2;   // additive jitter range in [-1,1] space
    double contrast_min = 0.8;
    double contrast_max = 1.25;

    static AugmentConfig identity() {
        return {1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0};
    }
};

/// Loads root/<class>/<image>.{png,jpg,jpeg}: decode, center-crop square,
/// bilinear resize to resolution, rescale to [-1,1]. Lexicographic file
/// order; unreadable files are skipped with a warning on stderr.
ImageDataset load_image_folder(const std::string& path, int resolution);

/// crop -> resize -> flips -> color jitter, clamped to [-1,1]. image is [C,R,R].
Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng);

/// Brings every class to exactly per_class_target images: originals first,
/// then augmented copies of round-robin-selected originals, each on its own
/// derived RNG substream. Classes larger than the target require
/// allow_subsample.
ImageDataset balance_classes(const ImageDataset& dataset, int per_class_target,
                             const AugmentConfig& cfg, Rng& rng, bool allow_subsample = false);

/// n draws from an equal-weight mixture of grid_side^2 isotropic Gaussians
/// on a centered grid. Stored as [n, 2, 1, 1].
ImageDataset synth_gaussian_grid(int n, int grid_side, double spacing, double stddev, Rng& rng);

Tensor gaussian_grid_centers(int grid_side, double spacing);

/// Dataset view as points [n, 2] (for mode_coverage).
Tensor dataset_points(const ImageDataset& dataset);

/// Procedural two-tone tiles with exact 4-fold rotational symmetry,
/// grayscale, resolution in {28, 32, 64}.
ImageDataset synth_motif(int n, int resolution, Rng& rng);

/// Cache: <path>.bin (flat little-endian float32) + <path>.json manifest.
void save_dataset_cache(const ImageDataset& dataset, const std::string& path);
ImageDataset load_dataset_cache(const std::string& path);

}  // namespace diffgan
