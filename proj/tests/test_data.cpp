#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "diffgan/data.hpp"
#include "diffgan/error.hpp"
#include "diffgan/image_io.hpp"
#include "diffgan/metrics.hpp"

using namespace diffgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("diffgan_data_test_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ImageU8 solid_image(int w, int h, int channels, uint8_t value) {
    ImageU8 img;
    img.width = w;
    img.height = h;
    img.channels = channels;
    img.pixels.assign(size_t(w) * h * channels, value);
    return img;
}

}  // namespace

TEST_CASE("png round trip through image_io") {
    TempDir tmp;
    ImageU8 img = solid_image(5, 4, 3, 0);
    for (size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = uint8_t((i * 7) % 256);
    const std::string p = (tmp.path / "roundtrip.png").string();
    write_png(p, img);
    ImageU8 back = read_image(p);
    CHECK(back.width == 5);
    CHECK(back.height == 4);
    CHECK(back.channels == 3);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("load_image_folder: classes, order, rescale") {
    TempDir tmp;
    for (const char* cls : {"alpha", "beta", "gamma"}) {
        fs::create_directories(tmp.path / cls);
        for (int i = 0; i < 2; ++i) {
            const uint8_t shade = cls[0] == 'a' ? 255 : (cls[0] == 'b' ? 128 : 0);
            write_png((tmp.path / cls / ("img" + std::to_string(i) + ".png")).string(),
                      solid_image(64, 64, 1, shade));
        }
    }
    ImageDataset ds = load_image_folder(tmp.path.string(), 16);
    CHECK(ds.n() == 6);
    CHECK(ds.channels == 1);
    CHECK(ds.resolution == 16);
    CHECK(ds.classes == std::vector<std::string>{"alpha", "beta", "gamma"});
    CHECK(ds.labels == std::vector<int>{0, 0, 1, 1, 2, 2});
    // all-white images land exactly at 1.0
    for (int k = 0; k < 16 * 16; ++k) CHECK(ds.images[k] == 1.0);

    ImageDataset again = load_image_folder(tmp.path.string(), 16);
    CHECK(again.images.vec() == ds.images.vec());
    CHECK(again.labels == ds.labels);

    CHECK_THROWS_AS(load_image_folder((tmp.path / "missing").string(), 16), DataError);
}

TEST_CASE("augment: identity config is the identity") {
    Rng rng(1, 1);
    Tensor img = Tensor::randn(rng, {3, 8, 8});
    for (auto& v : img.vec()) v = std::clamp(v, -1.0, 1.0);
    Rng arng(2, 1);
    Tensor out = augment(img, AugmentConfig::identity(), arng);
    CHECK(out.vec() == img.vec());
}

TEST_CASE("augment: forced horizontal flip is an involution") {
    Rng rng(3, 1);
    Tensor img = Tensor::randn(rng, {1, 6, 6});
    for (auto& v : img.vec()) v = std::tanh(v);  // keep inside [-1,1]
    AugmentConfig cfg = AugmentConfig::identity();
    cfg.hflip_p = 1.0;
    Rng a1(4, 1), a2(4, 2);
    Tensor once = augment(img, cfg, a1);
    Tensor twice = augment(once, cfg, a2);
    CHECK(twice.vec() == img.vec());
}

TEST_CASE("augment: vertical flip swaps rows") {
    Tensor img({1, 2, 2}, {0.1, 0.2, 0.3, 0.4});
    AugmentConfig cfg = AugmentConfig::identity();
    cfg.vflip_p = 1.0;
    Rng rng(5, 1);
    Tensor out = augment(img, cfg, rng);
    CHECK(out[0] == 0.3);
    CHECK(out[1] == 0.4);
    CHECK(out[2] == 0.1);
    CHECK(out[3] == 0.2);
}

TEST_CASE("augment: determinism per (cfg, seed, stream)") {
    Rng rng(6, 1);
    Tensor img = Tensor::randn(rng, {3, 10, 10});
    for (auto& v : img.vec()) v = std::clamp(v, -1.0, 1.0);
    AugmentConfig cfg;  // defaults exercise every branch
    Rng a1(7, 3), a2(7, 3);
    CHECK(augment(img, cfg, a1).vec() == augment(img, cfg, a2).vec());
    // output stays in range
    Rng a3(7, 4);
    Tensor out = augment(img, cfg, a3);
    for (int64_t i = 0; i < out.numel(); ++i) {
        CHECK(out[i] <= 1.0);
        CHECK(out[i] >= -1.0);
    }
}

TEST_CASE("balance_classes: exact uniform histogram") {
    // 2 classes of different sizes
    Rng rng(8, 1);
    ImageDataset ds;
    ds.channels = 1;
    ds.resolution = 8;
    ds.classes = {"a", "b"};
    ds.images = Tensor::randn(rng, {7, 1, 8, 8});
    for (auto& v : ds.images.vec()) v = std::clamp(v, -1.0, 1.0);
    ds.labels = {0, 0, 0, 0, 1, 1, 1};

    Rng brng(9, 1);
    ImageDataset bal = balance_classes(ds, 10, AugmentConfig{}, brng);
    CHECK(bal.n() == 20);
    int counts[2] = {0, 0};
    for (int l : bal.labels) counts[l]++;
    CHECK(counts[0] == 10);
    CHECK(counts[1] == 10);
    // originals first
    for (int64_t i = 0; i < 64; ++i) CHECK(bal.images[i] == ds.images[i]);

    // class of exactly target size passes through unchanged
    ImageDataset same = ds;
    same.labels = {0, 0, 0, 0, 1, 1, 1};
    Rng b2(9, 2);
    ImageDataset bal2 = balance_classes(same, 4, AugmentConfig{}, b2, /*allow_subsample=*/true);
    CHECK(bal2.n() == 8);

    // over target without permission
    CHECK_THROWS_AS(balance_classes(ds, 2, AugmentConfig{}, brng), ArgError);
}

TEST_CASE("balance_classes: empty class is named") {
    ImageDataset ds;
    ds.channels = 1;
    ds.resolution = 4;
    ds.classes = {"full", "hollow"};
    ds.images = Tensor::ones({2, 1, 4, 4});
    ds.labels = {0, 0};
    Rng rng(10, 1);
    try {
        balance_classes(ds, 4, AugmentConfig{}, rng);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("hollow") != std::string::npos);
    }
}

TEST_CASE("synth_gaussian_grid: counts and moments") {
    Rng rng(11, 1);
    ImageDataset ds = synth_gaussian_grid(100000, 5, 0.4, 0.0, rng);
    CHECK(ds.n() == 100000);
    Tensor pts = dataset_points(ds);
    Tensor centers = gaussian_grid_centers(5, 0.4);

    // std=0: points exactly on centers; per-mode counts within 5% of n/25
    ModeCoverage cov = mode_coverage(pts, centers, 1e-9);
    CHECK(cov.modes_covered == 25);
    CHECK(cov.hq_fraction == 1.0);

    std::vector<int> counts(25, 0);
    for (int i = 0; i < ds.n(); ++i) {
        for (int m = 0; m < 25; ++m)
            if (pts[int64_t(i) * 2] == centers[int64_t(m) * 2] &&
                pts[int64_t(i) * 2 + 1] == centers[int64_t(m) * 2 + 1]) {
                counts[static_cast<size_t>(m)]++;
                break;
            }
    }
    for (int m = 0; m < 25; ++m) CHECK(std::fabs(counts[static_cast<size_t>(m)] - 4000.0) < 200.0);

    // overall mean near the origin
    Rng rng2(11, 2);
    ImageDataset noisy = synth_gaussian_grid(40000, 5, 0.4, 0.05, rng2);
    Tensor npts = dataset_points(noisy);
    double mx = 0, my = 0;
    for (int i = 0; i < noisy.n(); ++i) {
        mx += npts[int64_t(i) * 2];
        my += npts[int64_t(i) * 2 + 1];
    }
    mx /= noisy.n();
    my /= noisy.n();
    // grid extent 1.6, per-axis std ~ sqrt(0.32); 3 standard errors
    const double se = std::sqrt(0.33) / std::sqrt(double(noisy.n()));
    CHECK(std::fabs(mx) < 3 * se);
    CHECK(std::fabs(my) < 3 * se);

    CHECK_THROWS_AS(synth_gaussian_grid(10, 5, 0.4, 0.05, rng), ArgError);
}

TEST_CASE("synth_motif: exact 4-fold symmetry and determinism") {
    Rng rng(12, 1);
    ImageDataset ds = synth_motif(16, 28, rng);
    CHECK(ds.n() == 16);
    CHECK(ds.channels == 1);
    const int r = 28;
    for (int img = 0; img < ds.n(); ++img) {
        const double* p = ds.images.data() + int64_t(img) * r * r;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) {
                // value at (i,j) equals value at the 90-degree rotation (j, r-1-i)
                CHECK(p[i * r + j] == p[j * r + (r - 1 - i)]);
            }
    }

    Rng rng_b(12, 1);
    ImageDataset again = synth_motif(16, 28, rng_b);
    CHECK(again.images.vec() == ds.images.vec());

    CHECK_THROWS_AS(synth_motif(4, 17, rng), ArgError);
}

TEST_CASE("dataset cache round trip") {
    TempDir tmp;
    Rng rng(13, 1);
    ImageDataset ds = synth_motif(8, 32, rng);
    ds.classes = {"motif"};
    ds.labels.assign(8, 0);
    const std::string base = (tmp.path / "cache").string();
    save_dataset_cache(ds, base);
    ImageDataset back = load_dataset_cache(base);
    CHECK(back.n() == 8);
    CHECK(back.channels == 1);
    CHECK(back.resolution == 32);
    CHECK(back.classes == ds.classes);
    CHECK(back.labels == ds.labels);
    // values quantized to float32 by the cache
    for (int64_t i = 0; i < ds.images.numel(); ++i)
        CHECK(back.images[i] == doctest::Approx(ds.images[i]).epsilon(1e-7));

    // truncated blob is detected
    fs::resize_file(tmp.path / "cache.bin", fs::file_size(tmp.path / "cache.bin") - 4);
    CHECK_THROWS_AS(load_dataset_cache(base), IoError);
}
