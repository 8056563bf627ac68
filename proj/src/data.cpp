#include "diffgan/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "diffgan/error.hpp"
#include "diffgan/image_io.hpp"
#include "diffgan/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace diffgan {

namespace {

constexpr uint64_t kAugmentPurpose = 0xA06;
constexpr uint64_t kMotifPurpose = 0x30F1;

uint64_t substream(const Rng& base, uint64_t purpose, uint64_t counter) {
    return base.stream_id() * 0x100000001B3ULL + stream_id(purpose, counter);
}

// [C,h,w] floats in [0,1] from an 8-bit image, optionally promoted to RGB.
Tensor decode_to_float(const ImageU8& img, int want_channels) {
    Tensor out({want_channels, img.height, img.width});
    const int64_t hw = int64_t(img.height) * img.width;
    for (int64_t p = 0; p < hw; ++p) {
        if (img.channels == 3) {
            for (int c = 0; c < 3; ++c) out[c * hw + p] = img.pixels[p * 3 + c] / 255.0;
        } else {
            const double v = img.pixels[p] / 255.0;
            for (int c = 0; c < want_channels; ++c) out[c * hw + p] = v;
        }
    }
    return out;
}

Tensor center_crop_square(const Tensor& img) {
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    const int side = std::min(h, w);
    if (side == h && side == w) return img;
    const int oy = (h - side) / 2, ox = (w - side) / 2;
    Tensor out({c, side, side});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < side; ++y)
            std::copy_n(img.data() + (int64_t(ch) * h + oy + y) * w + ox, side,
                        out.data() + (int64_t(ch) * side + y) * side);
    return out;
}

}  // namespace

ImageDataset load_image_folder(const std::string& path, int resolution) {
    if (!fs::is_directory(path)) throw DataError("dataset path is not a directory: " + path);

    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(path))
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw DataError("no class subdirectories in " + path);

    auto has_image_ext = [](const fs::path& p) {
        std::string e = p.extension().string();
        std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
        return e == ".png" || e == ".jpg" || e == ".jpeg";
    };

    std::vector<ImageU8> raw;
    std::vector<int> labels;
    int skipped = 0;
    bool any_color = false;
    for (size_t ci = 0; ci < class_dirs.size(); ++ci) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(path) / class_dirs[ci]))
            if (entry.is_regular_file() && has_image_ext(entry.path()))
                files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            try {
                raw.push_back(read_image(f));
                labels.push_back(static_cast<int>(ci));
                any_color = any_color || raw.back().channels == 3;
            } catch (const IoError& e) {
                std::cerr << "warning: skipping unreadable image: " << e.what() << "\n";
                ++skipped;
            }
        }
    }
    if (raw.empty())
        throw DataError("no readable images under " + path +
                        (skipped ? " (" + std::to_string(skipped) + " skipped)" : ""));

    const int channels = any_color ? 3 : 1;
    ImageDataset ds;
    ds.channels = channels;
    ds.resolution = resolution;
    ds.classes = class_dirs;
    ds.labels = std::move(labels);
    ds.provenance = path;
    ds.images = Tensor({static_cast<int>(raw.size()), channels, resolution, resolution});
    const int64_t per = int64_t(channels) * resolution * resolution;
    for (size_t i = 0; i < raw.size(); ++i) {
        Tensor f = decode_to_float(raw[i], channels);
        Tensor resized = kernels::resize_bilinear(center_crop_square(f), resolution, resolution);
        double* dst = ds.images.data() + int64_t(i) * per;
        for (int64_t k = 0; k < per; ++k) dst[k] = std::clamp(resized[k] * 2.0 - 1.0, -1.0, 1.0);
    }
    return ds;
}

Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
    const auto& s = image.shape();
    if (s.size() != 3) throw ArgError("augment expects [C,R,R], got " + image.shape_str());
    const int c = s[0], r = s[1];
    if (s[2] != r) throw ArgError("augment expects square images");

    Tensor out = image;

    // random square crop + resize back
    const double frac = cfg.crop_min + (1.0 - cfg.crop_min) * rng.uniform();
    const int side = std::clamp(static_cast<int>(std::lround(frac * r)), 1, r);
    const int oy = side < r ? static_cast<int>(rng.uniform_int(0, r - side)) : 0;
    const int ox = side < r ? static_cast<int>(rng.uniform_int(0, r - side)) : 0;
    if (side < r) {
        Tensor crop({c, side, side});
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < side; ++y)
                std::copy_n(out.data() + (int64_t(ch) * r + oy + y) * r + ox, side,
                            crop.data() + (int64_t(ch) * side + y) * side);
        out = kernels::resize_bilinear(crop, r, r);
    }

    const bool hflip = rng.uniform() < cfg.hflip_p;
    const bool vflip = rng.uniform() < cfg.vflip_p;
    if (hflip)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < r; ++y) {
                double* row = out.data() + (int64_t(ch) * r + y) * r;
                std::reverse(row, row + r);
            }
    if (vflip)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < r / 2; ++y)
                std::swap_ranges(out.data() + (int64_t(ch) * r + y) * r,
                                 out.data() + (int64_t(ch) * r + y + 1) * r,
                                 out.data() + (int64_t(ch) * r + (r - 1 - y)) * r);

    // color jitter: hue rotation about the gray axis (3-channel), then
    // affine brightness/contrast around mid-gray
    const double theta = cfg.hue_deg == 0.0
                             ? 0.0
                             : (rng.uniform() * 2.0 - 1.0) * cfg.hue_deg * M_PI / 180.0;
    const double bright = cfg.brightness == 0.0 ? 0.0 : (rng.uniform() * 2.0 - 1.0) * cfg.brightness;
    const double contrast = cfg.contrast_min + (cfg.contrast_max - cfg.contrast_min) * rng.uniform();

    if (c == 3 && theta != 0.0) {
        const double inv3 = 1.0 / 3.0, inv_s3 = 1.0 / std::sqrt(3.0);
        const double cosv = std::cos(theta), sinv = std::sin(theta);
        double m[3][3];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m[i][j] = cosv * (i == j) + (1.0 - cosv) * inv3;
        // cross-product part of the rotation about (1,1,1)/sqrt(3)
        m[0][1] += -sinv * inv_s3; m[0][2] += sinv * inv_s3;
        m[1][0] += sinv * inv_s3;  m[1][2] += -sinv * inv_s3;
        m[2][0] += -sinv * inv_s3; m[2][1] += sinv * inv_s3;
        const int64_t hw = int64_t(r) * r;
        for (int64_t p = 0; p < hw; ++p) {
            const double v0 = out[p], v1 = out[hw + p], v2 = out[2 * hw + p];
            out[p] = m[0][0] * v0 + m[0][1] * v1 + m[0][2] * v2;
            out[hw + p] = m[1][0] * v0 + m[1][1] * v1 + m[1][2] * v2;
            out[2 * hw + p] = m[2][0] * v0 + m[2][1] * v1 + m[2][2] * v2;
        }
    }
    if (bright != 0.0 || contrast != 1.0)
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] * contrast + bright;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], -1.0, 1.0);
    return out;
}

ImageDataset balance_classes(const ImageDataset& dataset, int per_class_target,
                             const AugmentConfig& cfg, Rng& rng, bool allow_subsample) {
    if (dataset.classes.empty()) throw DataError("balance_classes: dataset has no class labels");
    if (per_class_target < 1) throw ArgError("balance_classes: target must be positive");

    std::vector<std::vector<int>> members(dataset.classes.size());
    for (size_t i = 0; i < dataset.labels.size(); ++i)
        members[static_cast<size_t>(dataset.labels[i])].push_back(static_cast<int>(i));
    for (size_t ci = 0; ci < members.size(); ++ci) {
        if (members[ci].empty())
            throw DataError("balance_classes: class '" + dataset.classes[ci] + "' is empty");
        if (static_cast<int>(members[ci].size()) > per_class_target && !allow_subsample)
            throw ArgError("balance_classes: class '" + dataset.classes[ci] + "' has " +
                           std::to_string(members[ci].size()) + " > target " +
                           std::to_string(per_class_target) + " images (enable subsampling)");
    }

    const int n_classes = static_cast<int>(dataset.classes.size());
    const int64_t per = dataset.images.numel() / dataset.n();
    ImageDataset out;
    out.channels = dataset.channels;
    out.resolution = dataset.resolution;
    out.classes = dataset.classes;
    out.provenance = dataset.provenance;
    out.images = Tensor({n_classes * per_class_target, dataset.channels, dataset.resolution,
                         dataset.resolution});
    out.labels.resize(static_cast<size_t>(n_classes) * per_class_target);

    int64_t write_idx = 0;
    uint64_t aug_counter = 0;
    for (int ci = 0; ci < n_classes; ++ci) {
        const auto& idx = members[static_cast<size_t>(ci)];
        const int originals = std::min<int>(static_cast<int>(idx.size()), per_class_target);
        for (int i = 0; i < originals; ++i, ++write_idx) {
            std::copy_n(dataset.images.data() + int64_t(idx[static_cast<size_t>(i)]) * per, per,
                        out.images.data() + write_idx * per);
            out.labels[static_cast<size_t>(write_idx)] = ci;
        }
        for (int i = originals; i < per_class_target; ++i, ++write_idx, ++aug_counter) {
            const int src = idx[static_cast<size_t>((i - originals) % idx.size())];
            Tensor img({dataset.channels, dataset.resolution, dataset.resolution});
            std::copy_n(dataset.images.data() + int64_t(src) * per, per, img.data());
            Rng sub(rng.seed(), substream(rng, kAugmentPurpose, aug_counter));
            Tensor aug = augment(img, cfg, sub);
            std::copy_n(aug.data(), per, out.images.data() + write_idx * per);
            out.labels[static_cast<size_t>(write_idx)] = ci;
        }
    }
    return out;
}

Tensor gaussian_grid_centers(int grid_side, double spacing) {
    if (grid_side < 1) throw ArgError("gaussian_grid_centers: grid_side must be >= 1");
    Tensor centers({grid_side * grid_side, 2});
    const double off = (grid_side - 1) / 2.0;
    for (int i = 0; i < grid_side; ++i)
        for (int j = 0; j < grid_side; ++j) {
            centers[int64_t(i * grid_side + j) * 2] = (i - off) * spacing;
            centers[int64_t(i * grid_side + j) * 2 + 1] = (j - off) * spacing;
        }
    return centers;
}

ImageDataset synth_gaussian_grid(int n, int grid_side, double spacing, double stddev, Rng& rng) {
    const int modes = grid_side * grid_side;
    if (n < modes) throw ArgError("synth_gaussian_grid: need n >= grid_side^2");
    const Tensor centers = gaussian_grid_centers(grid_side, spacing);
    ImageDataset ds;
    ds.channels = 2;
    ds.resolution = 1;
    ds.provenance = "gaussian-grid";
    ds.images = Tensor({n, 2, 1, 1});
    for (int i = 0; i < n; ++i) {
        const int64_t mode = rng.uniform_int(0, modes - 1);
        ds.images[int64_t(i) * 2] = centers[mode * 2] + stddev * rng.normal();
        ds.images[int64_t(i) * 2 + 1] = centers[mode * 2 + 1] + stddev * rng.normal();
    }
    return ds;
}

Tensor dataset_points(const ImageDataset& dataset) {
    if (dataset.channels != 2 || dataset.resolution != 1)
        throw ArgError("dataset_points: dataset is not a 2D point set");
    return Tensor({dataset.n(), 2}, dataset.images.vec());
}

namespace {

// 4-fold rotation orbit: value assigned from the lexicographically smallest
// member, so the symmetry is exact in floating point.
struct MotifParams {
    double tone0, tone1;
    bool dots, bands, lattice, diamond;
    int dot_period, dot_r2;
    int band_period, band_width;
    int lat_period, lat_width;
    int diamond_r;
};

bool motif_ink(const MotifParams& p, int res, int i, int j) {
    bool ink = false;
    if (p.dots) {
        const int ci = (i % p.dot_period) - p.dot_period / 2;
        const int cj = (j % p.dot_period) - p.dot_period / 2;
        ink = ink || (ci * ci + cj * cj <= p.dot_r2);
    }
    if (p.bands) ink = ink || ((i + j) % p.band_period) < p.band_width;
    if (p.lattice) ink = ink || (i % p.lat_period) < p.lat_width || (j % p.lat_period) < p.lat_width;
    if (p.diamond) {
        const double c = (res - 1) / 2.0;
        ink = ink || std::fabs(i - c) + std::fabs(j - c) <= p.diamond_r;
    }
    return ink;
}

}  // namespace

ImageDataset synth_motif(int n, int resolution, Rng& rng) {
    if (resolution != 28 && resolution != 32 && resolution != 64)
        throw ArgError("synth_motif: resolution must be one of 28, 32, 64");
    if (n < 1) throw ArgError("synth_motif: n must be positive");

    ImageDataset ds;
    ds.channels = 1;
    ds.resolution = resolution;
    ds.provenance = "motif";
    ds.images = Tensor({n, 1, resolution, resolution});

    const int r = resolution;
    for (int img = 0; img < n; ++img) {
        Rng sub(rng.seed(), substream(rng, kMotifPurpose, static_cast<uint64_t>(img)));
        MotifParams p;
        p.tone0 = -1.0 + 0.6 * sub.uniform();   // dark tone
        p.tone1 = 0.4 + 0.6 * sub.uniform();    // light tone
        p.dots = sub.uniform() < 0.7;
        p.bands = sub.uniform() < 0.6;
        p.lattice = sub.uniform() < 0.5;
        p.diamond = sub.uniform() < 0.35;
        if (!p.dots && !p.bands && !p.lattice && !p.diamond) p.lattice = true;
        p.dot_period = 4 + static_cast<int>(sub.uniform_int(0, 4));
        const int max_r = std::max(1, p.dot_period / 2 - 1);
        const int dr = 1 + static_cast<int>(sub.uniform_int(0, max_r - 1));
        p.dot_r2 = dr * dr;
        p.band_period = 4 + static_cast<int>(sub.uniform_int(0, 5));
        p.band_width = 1 + static_cast<int>(sub.uniform_int(0, std::max(1, p.band_period / 2) - 1));
        p.lat_period = 5 + static_cast<int>(sub.uniform_int(0, 5));
        p.lat_width = 1 + static_cast<int>(sub.uniform_int(0, 1));
        p.diamond_r = r / 6 + static_cast<int>(sub.uniform_int(0, r / 4));
        const bool invert = sub.uniform() < 0.5;

        double* dst = ds.images.data() + int64_t(img) * r * r;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) {
                // canonical orbit member under 90-degree rotation
                int ci = i, cj = j;
                int bi = i, bj = j;
                for (int rot = 0; rot < 3; ++rot) {
                    const int ni = cj, nj = r - 1 - ci;
                    ci = ni; cj = nj;
                    if (ci < bi || (ci == bi && cj < bj)) { bi = ci; bj = cj; }
                }
                bool ink = motif_ink(p, r, bi, bj);
                if (invert) ink = !ink;
                dst[int64_t(i) * r + j] = ink ? p.tone1 : p.tone0;
            }
    }
    return ds;
}

void save_dataset_cache(const ImageDataset& dataset, const std::string& path) {
    json manifest;
    manifest["format_version"] = 1;
    manifest["n"] = dataset.n();
    manifest["channels"] = dataset.channels;
    manifest["resolution"] = dataset.resolution;
    manifest["classes"] = dataset.classes;
    manifest["labels"] = dataset.labels;
    manifest["provenance"] = dataset.provenance;

    std::ofstream jf(path + ".json");
    if (!jf) throw IoError("cannot write " + path + ".json");
    jf << manifest.dump(2) << "\n";
    jf.close();

    std::ofstream bf(path + ".bin", std::ios::binary);
    if (!bf) throw IoError("cannot write " + path + ".bin");
    std::vector<float> buf(static_cast<size_t>(dataset.images.numel()));
    for (int64_t i = 0; i < dataset.images.numel(); ++i)
        buf[static_cast<size_t>(i)] = static_cast<float>(dataset.images[i]);
    bf.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 4));
    if (!bf) throw IoError("failed writing " + path + ".bin");
}

ImageDataset load_dataset_cache(const std::string& path) {
    std::ifstream jf(path + ".json");
    if (!jf) throw IoError("cannot open dataset manifest " + path + ".json");
    json manifest;
    try {
        jf >> manifest;
    } catch (const json::exception& e) {
        throw IoError("bad dataset manifest " + path + ".json: " + e.what());
    }
    if (manifest.value("format_version", 0) != 1)
        throw IoError("dataset cache " + path + ": unsupported format_version");

    ImageDataset ds;
    const int n = manifest.at("n").get<int>();
    ds.channels = manifest.at("channels").get<int>();
    ds.resolution = manifest.at("resolution").get<int>();
    ds.classes = manifest.value("classes", std::vector<std::string>{});
    ds.labels = manifest.value("labels", std::vector<int>{});
    ds.provenance = manifest.value("provenance", std::string{});

    const int64_t count = int64_t(n) * ds.channels * ds.resolution * ds.resolution;
    std::ifstream bf(path + ".bin", std::ios::binary);
    if (!bf) throw IoError("cannot open dataset blob " + path + ".bin");
    std::vector<float> buf(static_cast<size_t>(count));
    bf.read(reinterpret_cast<char*>(buf.data()), std::streamsize(count * 4));
    if (bf.gcount() != std::streamsize(count * 4))
        throw IoError("dataset blob " + path + ".bin truncated: expected " +
                      std::to_string(count * 4) + " bytes");

    ds.images = Tensor({n, ds.channels, ds.resolution, ds.resolution});
    for (int64_t i = 0; i < count; ++i) ds.images[i] = static_cast<double>(buf[static_cast<size_t>(i)]);
    return ds;
}

}  // namespace diffgan
