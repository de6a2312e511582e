#include "walkfeat/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace walkfeat {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "walkfeat-checkpoint";

json tensor_to_json(const TensorData& t) {
    return json{{"shape", t.shape}, {"data", t.data}};
}

TensorData tensor_from_json(const json& j, const char* name) {
    try {
        TensorData t;
        t.shape = j.at("shape").get<std::vector<long>>();
        t.data = j.at("data").get<std::vector<double>>();
        return t;
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint tensor '") + name + "': " + e.what());
    }
}

}  // namespace

void save_checkpoint_file(const CheckpointData& ckpt, const std::string& path) {
    json j;
    j["format"] = kMagic;
    j["version"] = ckpt.version;
    j["config_hash"] = ckpt.config_hash;
    j["config_text"] = ckpt.config_text;
    j["epoch"] = ckpt.epoch;
    json enc = json::object(), proj = json::object();
    for (const auto& [name, t] : ckpt.encoder) enc[name] = tensor_to_json(t);
    for (const auto& [name, t] : ckpt.projection) proj[name] = tensor_to_json(t);
    j["encoder"] = std::move(enc);
    j["projection"] = std::move(proj);
    j["adam_step"] = ckpt.adam_step;
    json m = json::array(), v = json::array();
    for (const auto& t : ckpt.adam_m) m.push_back(tensor_to_json(t));
    for (const auto& t : ckpt.adam_v) v.push_back(tensor_to_json(t));
    j["adam_m"] = std::move(m);
    j["adam_v"] = std::move(v);
    j["has_clusters"] = ckpt.has_clusters;
    if (ckpt.has_clusters) {
        j["cluster_means"] = tensor_to_json(ckpt.cluster_means);
        j["cluster_accum_sum"] = tensor_to_json(ckpt.cluster_accum_sum);
        j["cluster_accum_count"] = ckpt.cluster_accum_count;
        j["cluster_epoch_of_last_update"] = ckpt.cluster_epoch_of_last_update;
        j["cluster_window"] = tensor_to_json(ckpt.cluster_window);
        j["cluster_window_assignments"] = ckpt.cluster_window_assignments;
    }

    std::vector<std::uint8_t> bytes = json::to_cbor(j);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open checkpoint for writing: " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("checkpoint write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("checkpoint rename failed: " + ec.message());
}

CheckpointData load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::from_cbor(bytes);
    } catch (const json::exception& e) {
        throw DataError(path + ": not a valid checkpoint: " + e.what());
    }
    try {
        if (j.value("format", "") != kMagic)
            throw DataError(path + ": not a walkfeat checkpoint");
        CheckpointData ckpt;
        ckpt.version = j.at("version").get<int>();
        if (ckpt.version != 1)
            throw DataError(path + ": unsupported checkpoint version " +
                            std::to_string(ckpt.version));
        ckpt.config_hash = j.at("config_hash").get<std::string>();
        ckpt.config_text = j.at("config_text").get<std::string>();
        ckpt.epoch = j.at("epoch").get<int>();
        for (const auto& [name, t] : j.at("encoder").items())
            ckpt.encoder[name] = tensor_from_json(t, name.c_str());
        for (const auto& [name, t] : j.at("projection").items())
            ckpt.projection[name] = tensor_from_json(t, name.c_str());
        ckpt.adam_step = j.at("adam_step").get<long>();
        for (const auto& t : j.at("adam_m")) ckpt.adam_m.push_back(tensor_from_json(t, "adam_m"));
        for (const auto& t : j.at("adam_v")) ckpt.adam_v.push_back(tensor_from_json(t, "adam_v"));
        ckpt.has_clusters = j.at("has_clusters").get<bool>();
        if (ckpt.has_clusters) {
            ckpt.cluster_means = tensor_from_json(j.at("cluster_means"), "cluster_means");
            ckpt.cluster_accum_sum =
                tensor_from_json(j.at("cluster_accum_sum"), "cluster_accum_sum");
            ckpt.cluster_accum_count = j.at("cluster_accum_count").get<std::vector<long>>();
            ckpt.cluster_epoch_of_last_update = j.at("cluster_epoch_of_last_update").get<int>();
            ckpt.cluster_window = tensor_from_json(j.at("cluster_window"), "cluster_window");
            ckpt.cluster_window_assignments =
                j.at("cluster_window_assignments").get<std::vector<int>>();
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw DataError(path + ": malformed checkpoint: " + e.what());
    }
}

TrainConfig checkpoint_train_config(const CheckpointData& ckpt) {
    return parse_train_config_text(ckpt.config_text);
}

}  // namespace walkfeat
