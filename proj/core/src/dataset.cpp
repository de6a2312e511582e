#include "walkfeat/dataset.hpp"

#include <filesystem>
#include <map>

namespace walkfeat {

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

std::string manifest_base_dir(const std::string& manifest_path) {
    return std::filesystem::path(manifest_path).parent_path().string();
}

std::vector<ModelGroup> load_train_groups(const Manifest& manifest, const std::string& base_dir,
                                          const std::string& split) {
    std::vector<ModelGroup> groups;
    std::map<std::string, std::size_t> index;
    for (const auto& rec : manifest.records) {
        if (rec.split != split) continue;
        auto [it, inserted] = index.try_emplace(rec.source_id, groups.size());
        if (inserted) groups.push_back(ModelGroup{rec.source_id, {}});
        Mesh mesh = read_mesh_file(resolve(base_dir, rec.path));
        mesh.source_id = rec.source_id;
        mesh.label.clear();  // labels never reach the training path
        WalkMesh wm;
        wm.mesh = normalize_mesh(mesh);
        wm.adjacency = build_adjacency(wm.mesh);
        groups[it->second].versions.push_back(std::move(wm));
    }
    return groups;
}

std::vector<EvalModel> load_eval_models(const Manifest& manifest, const std::string& base_dir,
                                        const std::string& split) {
    std::vector<EvalModel> models;
    std::map<std::string, std::size_t> index;
    for (const auto& rec : manifest.records) {
        if (!split.empty() && rec.split != split) continue;
        auto [it, inserted] = index.try_emplace(rec.source_id, models.size());
        if (inserted)
            models.push_back(EvalModel{rec.source_id, rec.label.value_or(""), {}});
        Mesh mesh = read_mesh_file(resolve(base_dir, rec.path));
        mesh.source_id = rec.source_id;
        mesh.label = rec.label.value_or("");
        models[it->second].versions.push_back(std::move(mesh));
    }
    return models;
}

}  // namespace walkfeat
