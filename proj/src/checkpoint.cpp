#include "diffgan/checkpoint.hpp"

#include <json.hpp>

#include <fstream>

#include "diffgan/error.hpp"

using nlohmann::json;

namespace diffgan {

namespace {
constexpr int kFormatVersion = 1;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["iter"] = ckpt.iter;
    manifest["config"] = config_to_map(ckpt.config);
    manifest["data"] = {{"resolution", ckpt.data_resolution}, {"channels", ckpt.data_channels}};
    manifest["diffusion"] = {{"t_current", ckpt.t_current}, {"tepl", ckpt.tepl}};
    manifest["adam"] = {{"step_g", ckpt.adam_step_g}, {"step_d", ckpt.adam_step_d}};

    json tensors = json::array();
    int64_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        tensors.push_back({{"name", name},
                           {"shape", t.shape()},
                           {"offset", offset},
                           {"count", t.numel()}});
        offset += t.numel() * 4;
    }
    manifest["tensors"] = std::move(tensors);

    std::ofstream jf(path + ".json");
    if (!jf) throw IoError("cannot write " + path + ".json");
    jf << manifest.dump(2) << "\n";
    if (!jf) throw IoError("failed writing " + path + ".json");
    jf.close();

    std::ofstream bf(path + ".bin", std::ios::binary);
    if (!bf) throw IoError("cannot write " + path + ".bin");
    for (const auto& [name, t] : ckpt.tensors) {
        std::vector<float> buf(static_cast<size_t>(t.numel()));
        for (int64_t i = 0; i < t.numel(); ++i) buf[static_cast<size_t>(i)] = static_cast<float>(t[i]);
        bf.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 4));
    }
    if (!bf) throw IoError("failed writing " + path + ".bin");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream jf(path + ".json");
    if (!jf) throw IoError("cannot open checkpoint manifest " + path + ".json");
    json manifest;
    try {
        jf >> manifest;
    } catch (const json::exception& e) {
        throw IoError("bad checkpoint manifest " + path + ".json: " + e.what());
    }

    if (manifest.value("format_version", -1) != kFormatVersion)
        throw IoError("checkpoint " + path + ": format_version mismatch (expected " +
                      std::to_string(kFormatVersion) + ")");

    Checkpoint ckpt;
    try {
        ckpt.iter = manifest.at("iter").get<int64_t>();
        ckpt.config = config_from_map(
            manifest.at("config").get<std::map<std::string, std::string>>());
        ckpt.data_resolution = manifest.at("data").at("resolution").get<int>();
        ckpt.data_channels = manifest.at("data").at("channels").get<int>();
        ckpt.t_current = manifest.at("diffusion").at("t_current").get<int>();
        ckpt.tepl = manifest.at("diffusion").at("tepl").get<std::vector<int>>();
        ckpt.adam_step_g = manifest.at("adam").at("step_g").get<int64_t>();
        ckpt.adam_step_d = manifest.at("adam").at("step_d").get<int64_t>();
    } catch (const json::exception& e) {
        throw IoError("checkpoint " + path + ": manifest field error: " + e.what());
    }

    std::ifstream bf(path + ".bin", std::ios::binary);
    if (!bf) throw IoError("cannot open checkpoint blob " + path + ".bin");
    bf.seekg(0, std::ios::end);
    const int64_t blob_size = bf.tellg();

    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        const int64_t offset = entry.at("offset").get<int64_t>();
        const int64_t count = entry.at("count").get<int64_t>();
        if (checked_numel(shape) != count)
            throw IoError("checkpoint " + path + ": tensor '" + name +
                          "' shape/count disagreement");
        if (offset + count * 4 > blob_size)
            throw IoError("checkpoint " + path + ": blob truncated at tensor '" + name +
                          "' (need " + std::to_string(offset + count * 4) + " bytes, have " +
                          std::to_string(blob_size) + ")");
        std::vector<float> buf(static_cast<size_t>(count));
        bf.seekg(offset);
        bf.read(reinterpret_cast<char*>(buf.data()), std::streamsize(count * 4));
        if (bf.gcount() != std::streamsize(count * 4))
            throw IoError("checkpoint " + path + ": short read at tensor '" + name + "'");
        Tensor t(shape);
        for (int64_t i = 0; i < count; ++i) t[i] = static_cast<double>(buf[static_cast<size_t>(i)]);
        ckpt.tensors.emplace_back(name, std::move(t));
    }
    return ckpt;
}

}  // namespace diffgan
