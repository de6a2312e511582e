#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace walkfeat {

/// One dataset entry. Manifests are JSON-lines files; `source_id` ties all
/// resampled versions of a model together and `split` partitions models into
/// train/test. `label` is absent for unlabeled data.
struct ManifestRecord {
    std::string path;
    std::string source_id;
    std::optional<std::string> label;
    std::optional<std::uint64_t> seed;
    int face_count = 0;
    std::string split = "train";  // "train" | "test"
};

struct Manifest {
    std::vector<ManifestRecord> records;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

std::string manifest_record_to_json(const ManifestRecord& record);

}  // namespace walkfeat
