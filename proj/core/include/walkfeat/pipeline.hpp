#pragma once

#include <string>
#include <vector>

#include "walkfeat/checkpoint.hpp"
#include "walkfeat/config.hpp"
#include "walkfeat/walker.hpp"

namespace walkfeat {

/// One loss-trace entry per training batch.
struct TraceRow {
    int epoch = 0;
    int batch = 0;
    double nt_xent = 0.0;
    double kmeans = 0.0;
    double total = 0.0;
};

/// Pre-projection encoder output for one model; this is what retrieval and
/// classification consume.
struct FeatureVector {
    std::vector<double> values;
    std::string source_id;
    std::string label;  // empty = unlabeled
};

struct TrainResult {
    CheckpointData checkpoint;
    std::vector<TraceRow> trace;
};

/// Trains encoder + projection under the combined loss schedule: contrastive
/// from epoch 0, clustering added from loss.cluster_start_epoch (means seeded
/// from a full forward pass, then refreshed every means_update_period
/// epochs). One epoch visits every source_id in exactly one shuffled batch.
/// A checkpoint is written to `checkpoint_dir`/checkpoint.cbor after every
/// epoch unless the dir is empty. Throws NumericError if the loss goes
/// non-finite.
TrainResult train(const TrainConfig& config, const std::vector<ModelGroup>& dataset,
                  const std::string& checkpoint_dir = "");

/// Embeds one mesh: runs n_walks seeded walks, encodes each, keeps the
/// ceil(n/2) features closest to the mean feature (ties keep the earlier
/// walk), and returns their average.
FeatureVector embed_mesh(const CheckpointData& checkpoint, const Mesh& mesh, int n_walks,
                         std::uint64_t seed);

/// A model as evaluation sees it: labeled, with all resampled versions.
struct EvalModel {
    std::string source_id;
    std::string label;
    std::vector<Mesh> versions;
};

/// One FeatureVector per model, embedded on its highest-face-count version,
/// in dataset order. Deterministic per seed for any thread count.
std::vector<FeatureVector> embed_dataset(const CheckpointData& checkpoint,
                                         const std::vector<EvalModel>& dataset, int n_walks,
                                         std::uint64_t seed, int threads = 1);

/// Selection mask used by embed_mesh, exposed for property checks: indices of
/// the ceil(n/2) rows closest to the row mean, in ascending index order.
std::vector<int> select_closest_to_mean(const Mat<double>& features);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

struct EmbeddingRecord {
    FeatureVector feature;
    std::string split = "train";
};

void write_embeddings_jsonl(const std::vector<EmbeddingRecord>& records, const std::string& path);
std::vector<EmbeddingRecord> read_embeddings_jsonl(const std::string& path);

}  // namespace walkfeat
