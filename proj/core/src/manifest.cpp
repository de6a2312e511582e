#include "walkfeat/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "walkfeat/errors.hpp"

namespace walkfeat {

using nlohmann::json;

namespace {

json to_json(const ManifestRecord& r) {
    json j{{"path", r.path},
           {"source_id", r.source_id},
           {"face_count", r.face_count},
           {"split", r.split}};
    if (r.label) j["class"] = *r.label;
    if (r.seed) j["seed"] = *r.seed;
    return j;
}

ManifestRecord from_json(const json& j, const std::string& where) {
    try {
        ManifestRecord r;
        r.path = j.at("path").get<std::string>();
        r.source_id = j.at("source_id").get<std::string>();
        if (j.contains("class") && !j["class"].is_null())
            r.label = j["class"].get<std::string>();
        if (j.contains("seed") && !j["seed"].is_null())
            r.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("face_count")) r.face_count = j["face_count"].get<int>();
        if (j.contains("split")) r.split = j["split"].get<std::string>();
        if (r.split != "train" && r.split != "test")
            throw DataError(where + ": split must be 'train' or 'test'");
        return r;
    } catch (const json::exception& e) {
        throw DataError(where + ": " + e.what());
    }
}

}  // namespace

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    Manifest manifest;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        manifest.records.push_back(from_json(j, path + ":" + std::to_string(line_no)));
    }
    return manifest;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open manifest for writing: " + path);
    for (const auto& r : manifest.records) out << to_json(r).dump() << "\n";
    if (!out) throw DataError("manifest write failed: " + path);
}

std::string manifest_record_to_json(const ManifestRecord& record) {
    return to_json(record).dump();
}

}  // namespace walkfeat
