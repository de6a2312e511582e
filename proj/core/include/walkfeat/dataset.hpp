#pragma once

#include <string>
#include <vector>

#include "walkfeat/manifest.hpp"
#include "walkfeat/pipeline.hpp"
#include "walkfeat/walker.hpp"

namespace walkfeat {

/// Groups manifest records by source_id (keeping both splits apart) and loads
/// the referenced meshes normalized and adjacency-built, ready to walk. The
/// returned groups carry no labels: the training path cannot read class
/// information. Relative record paths resolve against `base_dir`.
std::vector<ModelGroup> load_train_groups(const Manifest& manifest, const std::string& base_dir,
                                          const std::string& split = "train");

/// Same grouping with labels retained, for the evaluation side. Empty
/// `split` loads everything.
std::vector<EvalModel> load_eval_models(const Manifest& manifest, const std::string& base_dir,
                                        const std::string& split = "");

std::string manifest_base_dir(const std::string& manifest_path);

}  // namespace walkfeat
