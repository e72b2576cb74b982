#ifndef AIFMAZE_CHECKPOINT_HPP
#define AIFMAZE_CHECKPOINT_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aifmaze/config.hpp"
#include "aifmaze/tensor.hpp"

namespace aifmaze {

// Checkpoint = JSON manifest (version, config snapshot, RNG state, tensor
// table) plus a sidecar .bin of the flat arrays as little-endian float32.
// save -> load -> save is byte-identical.

constexpr int kCheckpointVersion = 1;

inline std::filesystem::path checkpoint_data_path(const std::filesystem::path& manifest_path) {
    std::filesystem::path p = manifest_path;
    p.replace_extension(".bin");
    return p;
}

using NamedStores = std::vector<std::pair<std::string, ParamStore*>>;

inline void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg,
                            const NamedStores& stores, const std::string& rng_state) {
    nlohmann::json manifest;
    manifest["version"] = kCheckpointVersion;
    manifest["config"] = config_key_map(cfg);
    manifest["rng"] = rng_state;
    manifest["data_file"] = checkpoint_data_path(path).filename().string();

    std::vector<float> data;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [prefix, store] : stores) {
        for (std::size_t i = 0; i < store->size(); ++i) {
            const Param& p = store->at(i);
            nlohmann::json t;
            t["name"] = prefix + "/" + p.name;
            t["shape"] = p.shape;
            t["offset"] = data.size();
            t["count"] = p.value.size();
            tensors.push_back(std::move(t));
            for (double v : p.value) data.push_back(static_cast<float>(v));
        }
    }
    manifest["tensors"] = std::move(tensors);

    std::ofstream mf(path, std::ios::trunc);
    if (!mf) throw CheckpointError("cannot write checkpoint manifest: " + path.string());
    mf << manifest.dump(2) << "\n";
    mf.close();

    std::ofstream bf(checkpoint_data_path(path), std::ios::trunc | std::ios::binary);
    if (!bf) throw CheckpointError("cannot write checkpoint data: " + checkpoint_data_path(path).string());
    bf.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(float)));
}

struct CheckpointManifest {
    RunConfig config;
    std::string rng_state;
    struct TensorEntry {
        std::string name;
        std::vector<int> shape;
        std::size_t offset = 0;
        std::size_t count = 0;
    };
    std::vector<TensorEntry> tensors;
    std::filesystem::path data_path;
};

inline CheckpointManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream mf(path);
    if (!mf) throw CheckpointError("cannot open checkpoint manifest: " + path.string());
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("corrupt checkpoint manifest: " + std::string(e.what()));
    }
    if (!manifest.contains("version") || manifest["version"].get<int>() != kCheckpointVersion)
        throw CheckpointError("unknown checkpoint version");

    CheckpointManifest out;
    std::string config_text;
    for (const auto& [k, v] : manifest.at("config").items())
        config_text += k + " = " + v.get<std::string>() + "\n";
    out.config = parse_config(config_text);
    out.rng_state = manifest.at("rng").get<std::string>();
    out.data_path = path.parent_path() / manifest.at("data_file").get<std::string>();
    for (const auto& t : manifest.at("tensors")) {
        CheckpointManifest::TensorEntry e;
        e.name = t.at("name").get<std::string>();
        e.shape = t.at("shape").get<std::vector<int>>();
        e.offset = t.at("offset").get<std::size_t>();
        e.count = t.at("count").get<std::size_t>();
        out.tensors.push_back(std::move(e));
    }
    return out;
}

// Fills the stores from the checkpoint. Everything is validated (tensor
// names both ways, shapes, data size) before any store is touched, so a bad
// file never leaves a half-loaded model.
inline void load_tensors(const CheckpointManifest& manifest, const NamedStores& stores) {
    std::size_t total = 0;
    for (const auto& t : manifest.tensors) {
        if (t.offset != total) throw CheckpointError("checkpoint manifest has non-contiguous tensor " + t.name);
        total += t.count;
    }

    std::ifstream bf(manifest.data_path, std::ios::binary | std::ios::ate);
    if (!bf) throw CheckpointError("cannot open checkpoint data: " + manifest.data_path.string());
    const auto file_size = static_cast<std::size_t>(bf.tellg());
    if (file_size != total * sizeof(float))
        throw CheckpointError("checkpoint data truncated or oversized: expected " +
                              std::to_string(total * sizeof(float)) + " bytes, found " +
                              std::to_string(file_size));
    bf.seekg(0);
    std::vector<float> data(total);
    bf.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(total * sizeof(float)));
    if (!bf) throw CheckpointError("checkpoint data unreadable: " + manifest.data_path.string());

    struct Pending {
        Param* param;
        const CheckpointManifest::TensorEntry* entry;
    };
    std::vector<Pending> writes;
    std::size_t expected = 0;
    for (const auto& [prefix, store] : stores) expected += store->size();
    if (expected != manifest.tensors.size())
        throw CheckpointError("checkpoint tensor count mismatch: manifest has " +
                              std::to_string(manifest.tensors.size()) + ", model needs " +
                              std::to_string(expected));

    std::size_t cursor = 0;
    for (const auto& [prefix, store] : stores) {
        for (std::size_t i = 0; i < store->size(); ++i, ++cursor) {
            Param& p = store->at(i);
            const auto& e = manifest.tensors[cursor];
            const std::string want = prefix + "/" + p.name;
            if (e.name != want)
                throw CheckpointError("checkpoint tensor order mismatch: expected " + want + ", found " + e.name);
            if (e.shape != p.shape || e.count != p.value.size())
                throw CheckpointError("checkpoint shape mismatch for tensor " + want);
            writes.push_back({&p, &e});
        }
    }

    for (const auto& w : writes) {
        for (std::size_t k = 0; k < w.entry->count; ++k)
            w.param->value[k] = static_cast<double>(data[w.entry->offset + k]);
    }
}

} // namespace aifmaze

#endif
