// diffgan command-line front end: prepare / train / sample / eval / compare.
//
// Exit codes: 0 success, 1 degraded result (FAILED comparison rows),
// 2 usage or configuration error, 3 numeric abort during training.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "diffgan/checkpoint.hpp"
#include "diffgan/config.hpp"
#include "diffgan/data.hpp"
#include "diffgan/error.hpp"
#include "diffgan/trainer.hpp"

using namespace diffgan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void print_class_histogram(const ImageDataset& ds, const std::string& title) {
    std::cout << title << " (" << ds.n() << " images";
    if (!ds.classes.empty()) std::cout << ", " << ds.classes.size() << " classes";
    std::cout << ")\n";
    if (ds.classes.empty()) return;
    std::vector<int> counts(ds.classes.size(), 0);
    for (int l : ds.labels) counts[static_cast<size_t>(l)]++;
    for (size_t i = 0; i < ds.classes.size(); ++i)
        std::cout << "  " << ds.classes[i] << ": " << counts[i] << "\n";
}

int cmd_prepare(const std::string& toy, const std::string& source, const std::string& out,
                int n, int resolution, int per_class, bool allow_subsample, uint64_t seed,
                int grid_side, double spacing, double stddev) {
    ImageDataset ds;
    Rng rng(seed, 0x9E1);
    if (!toy.empty()) {
        if (toy == "motif") {
            ds = synth_motif(n, resolution, rng);
            ds.classes = {"motif"};
            ds.labels.assign(static_cast<size_t>(ds.n()), 0);
        } else if (toy == "gaussian-grid") {
            ds = synth_gaussian_grid(n, grid_side, spacing, stddev, rng);
        } else {
            throw ConfigError("unknown toy dataset '" + toy + "' (motif | gaussian-grid)");
        }
    } else {
        ds = load_image_folder(source, resolution);
        print_class_histogram(ds, "loaded");
        if (per_class > 0) {
            ds = balance_classes(ds, per_class, AugmentConfig{}, rng, allow_subsample);
            print_class_histogram(ds, "balanced");
        }
    }
    save_dataset_cache(ds, out);
    std::cout << "wrote " << out << ".bin + " << out << ".json (n=" << ds.n()
              << ", channels=" << ds.channels << ", resolution=" << ds.resolution << ")\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, std::vector<std::string> overrides) {
    TrainConfig cfg = load_config_file(config_path);
    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + ov + "'");
        apply_config_override(cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    ImageDataset ds = load_dataset_cache(data_path);
    Trainer trainer(cfg, ds);
    try {
        trainer.train(out_dir);
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n"
                  << "diagnostic snapshot: " << (fs::path(out_dir) / "ckpt_diag").string() << "\n";
        return 3;
    }
    std::cout << "trained " << cfg.total_iters << " iterations -> " << out_dir << "\n";
    return 0;
}

int cmd_sample(const std::string& ckpt_path, int n, int grid, const std::string& out_png,
               uint64_t seed) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (n > grid * grid)
        throw ArgError("n=" + std::to_string(n) + " exceeds grid capacity " +
                       std::to_string(grid * grid));
    Tensor images = sample_from_checkpoint(ckpt, n, seed);
    save_sample_grid(images, grid, out_png);
    std::cout << "wrote " << out_png << " (" << n << " samples, " << grid << "x" << grid
              << " grid)\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, int n_samples,
             uint64_t seed, const std::string& out_json) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    ImageDataset ds = load_dataset_cache(data_path);
    if (n_samples <= 0) n_samples = std::min(ds.n(), 10000);
    if (n_samples < 2) throw ArgError("eval needs at least 2 samples");
    Trainer trainer(ckpt, ds);
    EvalResult ev = trainer.evaluate(n_samples, seed);
    json doc = {{"fid", ev.fid_value},   {"kid", ev.kid_value}, {"precision", ev.precision},
                {"recall", ev.recall},   {"n_real", ev.n_real}, {"n_fake", ev.n_fake},
                {"extractor", ckpt.config.extractor}, {"seed", seed}};
    const std::string text = doc.dump(2);
    std::cout << text << "\n";
    if (!out_json.empty()) {
        std::ofstream f(out_json);
        f << text << "\n";
    }
    return 0;
}

struct CompareCell {
    std::string variant;
    uint64_t seed = 0;
    bool failed = false;
    EvalResult ev;
};

const std::vector<std::pair<std::string, std::pair<std::string, std::string>>> kVariants = {
    {"base", {"ns", "false"}},
    {"base+Wloss", {"wasserstein", "false"}},
    {"base+Diffusion", {"ns", "true"}},
    {"base+Wloss+Diffusion", {"wasserstein", "true"}},
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_compare(const std::string& config_path, const std::string& data_path,
                const std::string& out_dir, std::vector<uint64_t> seeds, int jobs,
                int eval_samples, std::vector<std::string> overrides) {
    TrainConfig base = load_config_file(config_path);
    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + ov + "'");
        apply_config_override(base, ov.substr(0, eq), ov.substr(eq + 1));
    }
    ImageDataset ds = load_dataset_cache(data_path);
    if (seeds.empty()) seeds = {base.seed};
    fs::create_directories(out_dir);

    std::vector<CompareCell> cells;
    for (const auto& [name, flags] : kVariants)
        for (uint64_t s : seeds) cells.push_back({name, s, false, {}});

    std::mutex out_mutex;
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            CompareCell& cell = cells[idx];
            const auto& flags = kVariants[idx / seeds.size()].second;
            TrainConfig cfg = base;
            cfg.loss_kind = flags.first;
            cfg.diffusion_enabled = flags.second == "true";
            cfg.seed = cell.seed;
            const std::string run_dir =
                (fs::path(out_dir) / (cell.variant + "_seed" + std::to_string(cell.seed))).string();
            {
                std::lock_guard<std::mutex> lk(out_mutex);
                std::cout << "running " << cell.variant << " seed " << cell.seed << "...\n";
            }
            try {
                Trainer trainer(cfg, ds);
                trainer.train(run_dir);
                cell.ev = trainer.evaluate(eval_samples > 0 ? eval_samples
                                                            : std::min(ds.n(), 10000),
                                           cell.seed);
            } catch (const NumericError& e) {
                std::lock_guard<std::mutex> lk(out_mutex);
                std::cerr << cell.variant << " seed " << cell.seed << " FAILED: " << e.what()
                          << "\n";
                cell.failed = true;
            }
        }
    };
    jobs = std::max(1, jobs);
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // per-cell CSV
    std::ofstream csv(fs::path(out_dir) / "compare.csv");
    csv << "variant,seed,status,fid,kid,precision,recall\n";
    for (const auto& c : cells) {
        csv << c.variant << "," << c.seed << "," << (c.failed ? "FAILED" : "ok");
        if (c.failed) {
            csv << ",,,,\n";
        } else {
            char buf[160];
            std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%.9g,%.9g\n", c.ev.fid_value,
                          c.ev.kid_value, c.ev.precision, c.ev.recall);
            csv << buf;
        }
    }

    // aggregated text table: medians with (min/max); best *, second best _
    struct Agg {
        std::string variant;
        bool failed = false;
        double med[4] = {0, 0, 0, 0};
        double lo[4] = {0, 0, 0, 0};
        double hi[4] = {0, 0, 0, 0};
    };
    std::vector<Agg> aggs;
    bool any_failed = false;
    for (size_t vi = 0; vi < kVariants.size(); ++vi) {
        Agg agg;
        agg.variant = kVariants[vi].first;
        std::vector<double> vals[4];
        for (size_t si = 0; si < seeds.size(); ++si) {
            const CompareCell& c = cells[vi * seeds.size() + si];
            if (c.failed) {
                agg.failed = true;
                continue;
            }
            vals[0].push_back(c.ev.fid_value);
            vals[1].push_back(c.ev.kid_value);
            vals[2].push_back(c.ev.precision);
            vals[3].push_back(c.ev.recall);
        }
        if (vals[0].empty()) agg.failed = true;
        if (!agg.failed) {
            for (int m = 0; m < 4; ++m) {
                agg.med[m] = median(vals[m]);
                agg.lo[m] = *std::min_element(vals[m].begin(), vals[m].end());
                agg.hi[m] = *std::max_element(vals[m].begin(), vals[m].end());
            }
        }
        any_failed = any_failed || agg.failed;
        aggs.push_back(agg);
    }

    // rank per metric: FID/KID lower is better, precision/recall higher
    std::string marks[4][4];  // [metric][variant]
    for (int m = 0; m < 4; ++m) {
        std::vector<std::pair<double, size_t>> order;
        for (size_t v = 0; v < aggs.size(); ++v) {
            if (aggs[v].failed) continue;
            const double key = (m < 2) ? aggs[v].med[m] : -aggs[v].med[m];
            order.emplace_back(key, v);
        }
        std::sort(order.begin(), order.end());
        if (!order.empty()) marks[m][order[0].second] = "*";
        if (order.size() > 1) marks[m][order[1].second] = "_";
    }

    std::ostringstream table;
    table << "four-variant comparison, medians over " << seeds.size()
          << " seed(s), min/max in parentheses\n";
    table << "metrics use the fixed random-feature extractor, not Inception features;\n"
          << "absolute values are not comparable to published tables, orderings are\n\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-22s %-26s %-26s %-20s %-20s\n", "variant", "FID(down)",
                  "KID(down)", "Prec(up)", "Rec(up)");
    table << line;
    for (size_t v = 0; v < aggs.size(); ++v) {
        const Agg& a = aggs[v];
        if (a.failed) {
            std::snprintf(line, sizeof(line), "%-22s FAILED\n", a.variant.c_str());
            table << line;
            continue;
        }
        auto cellfmt = [&](int m, int width) {
            char tmp[96];
            std::snprintf(tmp, sizeof(tmp), "%s%.4g (%.4g/%.4g)", marks[m][v].c_str(), a.med[m],
                          a.lo[m], a.hi[m]);
            std::string s = tmp;
            if (static_cast<int>(s.size()) < width) s.append(width - s.size(), ' ');
            return s;
        };
        table << (a.variant + std::string(a.variant.size() < 22 ? 22 - a.variant.size() : 1, ' '))
              << " " << cellfmt(0, 26) << " " << cellfmt(1, 26) << " " << cellfmt(2, 20) << " "
              << cellfmt(3, 20) << "\n";
    }
    std::ofstream tf(fs::path(out_dir) / "compare.txt");
    tf << table.str();
    std::cout << table.str();
    return any_failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion-GAN training lab: adaptive forward-diffusion augmentation for "
                 "adversarial image-motif synthesis"};
    app.require_subcommand(1);

    // prepare
    auto* prep = app.add_subcommand("prepare", "build a dataset cache from a folder or a toy");
    std::string toy, source, out_path;
    int prep_n = 2000, prep_res = 28, per_class = 0, grid_side = 5;
    double spacing = 0.4, stddev = 0.02;
    bool allow_subsample = false;
    uint64_t prep_seed = 0;
    prep->add_option("--toy", toy, "toy dataset: motif | gaussian-grid");
    prep->add_option("--source", source, "image folder root/<class>/<image>.{png,jpg}");
    prep->add_option("--out", out_path, "output cache basename")->required();
    prep->add_option("--n", prep_n, "toy sample count");
    prep->add_option("--res", prep_res, "target resolution");
    prep->add_option("--per-class", per_class, "balance every class to this many images");
    prep->add_flag("--allow-subsample", allow_subsample, "permit classes larger than the target");
    prep->add_option("--seed", prep_seed, "augmentation/toy seed");
    prep->add_option("--grid-side", grid_side, "gaussian-grid side");
    prep->add_option("--spacing", spacing, "gaussian-grid spacing");
    prep->add_option("--std", stddev, "gaussian-grid mode stddev");

    // train
    auto* train = app.add_subcommand("train", "run one training configuration");
    std::string cfg_path, data_path, out_dir;
    std::vector<std::string> overrides;
    train->add_option("--config", cfg_path, "config file")->required();
    train->add_option("--data", data_path, "dataset cache basename")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--set", overrides, "config override key=value (repeatable)");

    // sample
    auto* sample = app.add_subcommand("sample", "write a PNG grid from a checkpoint");
    std::string ckpt_path, out_png;
    int sample_n = 16, sample_grid = 4;
    uint64_t sample_seed = 0;
    sample->add_option("--ckpt", ckpt_path, "checkpoint basename")->required();
    sample->add_option("--out", out_png, "output PNG path")->required();
    sample->add_option("--n", sample_n, "sample count");
    sample->add_option("--grid", sample_grid, "grid side");
    sample->add_option("--seed", sample_seed, "sampling seed");

    // eval
    auto* eval = app.add_subcommand("eval", "compute FID/KID/precision/recall for a checkpoint");
    std::string eval_ckpt, eval_data, eval_out;
    int eval_n = 0;
    uint64_t eval_seed = 0;
    eval->add_option("--ckpt", eval_ckpt, "checkpoint basename")->required();
    eval->add_option("--data", eval_data, "dataset cache basename")->required();
    eval->add_option("--n", eval_n, "generated sample count (0 = min(n_dataset, 10000))");
    eval->add_option("--seed", eval_seed, "sampling seed");
    eval->add_option("--out", eval_out, "also write the JSON here");

    // compare
    auto* compare = app.add_subcommand(
        "compare", "train and evaluate the four-variant matrix (loss x diffusion)");
    std::string cmp_cfg, cmp_data, cmp_out;
    std::vector<uint64_t> cmp_seeds;
    std::vector<std::string> cmp_overrides;
    int cmp_jobs = 1, cmp_eval_n = 0;
    compare->add_option("--config", cmp_cfg, "base config file")->required();
    compare->add_option("--data", cmp_data, "dataset cache basename")->required();
    compare->add_option("--out", cmp_out, "output directory")->required();
    compare->add_option("--seeds", cmp_seeds, "seeds (repeatable)");
    compare->add_option("--jobs", cmp_jobs, "parallel runs");
    compare->add_option("--eval-samples", cmp_eval_n, "samples per evaluation");
    compare->add_option("--set", cmp_overrides, "config override key=value (repeatable)");

    // keys
    auto* keys = app.add_subcommand("keys", "list every config key with default and description");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (prep->parsed()) {
            if (toy.empty() == source.empty())
                throw ConfigError("prepare needs exactly one of --toy or --source");
            return cmd_prepare(toy, source, out_path, prep_n, prep_res, per_class,
                               allow_subsample, prep_seed, grid_side, spacing, stddev);
        }
        if (train->parsed()) return cmd_train(cfg_path, data_path, out_dir, overrides);
        if (sample->parsed())
            return cmd_sample(ckpt_path, sample_n, sample_grid, out_png, sample_seed);
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_n, eval_seed, eval_out);
        if (compare->parsed())
            return cmd_compare(cmp_cfg, cmp_data, cmp_out, cmp_seeds, cmp_jobs, cmp_eval_n,
                               cmp_overrides);
        if (keys->parsed()) {
            for (const auto& row : config_key_docs(TrainConfig{}))
                std::cout << row.key << " = " << row.value << "\n    " << row.doc << "\n";
            return 0;
        }
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
