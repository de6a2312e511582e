#pragma once

#include <cstdint>
#include <string>

#include "walkfeat/losses.hpp"
#include "walkfeat/nn.hpp"

namespace walkfeat {

/// Everything the training loop needs. Two walks per model is fixed; the
/// rest mirrors the key=value config file one to one.
struct TrainConfig {
    std::string preset = "desk";    // network size preset: desk | paper
    std::string precision = "f32";  // training arithmetic: f32 | f64
    int batch_size = 64;            // models per batch (2 walks each)
    int walk_len = 128;
    double jump_prob = 0.05;
    int epochs = 300;
    LossConfig loss;
    AdamConfig adam;
    std::uint64_t seed = 0;
    int threads = 1;  // 1 = fully deterministic mode
    int inference_walks = 32;
};

/// TrainConfig plus the file-system side of a run.
struct RunConfig {
    TrainConfig train;
    std::string manifest_path;
    std::string out_dir;
};

void validate_train_config(const TrainConfig& config);

/// Parses "key=value" text ('#' starts a comment). Unknown keys and missing
/// required keys (manifest, out_dir) are all reported in one error.
RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config_file(const std::string& path);

/// Same grammar restricted to TrainConfig keys (no paths). Used to read the
/// config a checkpoint was trained with.
TrainConfig parse_train_config_text(const std::string& text);

/// Canonical sorted key=value rendering of the effective settings; the
/// checkpoint stores a hash of this.
std::string canonical_config(const TrainConfig& config);
std::string config_hash(const TrainConfig& config);

}  // namespace walkfeat
