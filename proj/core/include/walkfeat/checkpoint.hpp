#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "walkfeat/config.hpp"
#include "walkfeat/losses.hpp"
#include "walkfeat/nn.hpp"
#include "walkfeat/rng.hpp"

namespace walkfeat {

/// Shape-tagged tensor payload, always stored at 64-bit.
struct TensorData {
    std::vector<long> shape;  // {rows, cols}
    std::vector<double> data;  // row-major
};

/// Scalar-type-independent snapshot of a training run: parameters, optimizer
/// moments, cluster state, epoch counter, and the config it was trained with.
struct CheckpointData {
    int version = 1;
    std::string config_hash;
    std::string config_text;  // canonical key=value TrainConfig
    int epoch = 0;

    std::map<std::string, TensorData> encoder;
    std::map<std::string, TensorData> projection;

    long adam_step = 0;
    std::vector<TensorData> adam_m, adam_v;  // parameter-visitation order

    bool has_clusters = false;
    TensorData cluster_means, cluster_accum_sum;
    std::vector<long> cluster_accum_count;
    int cluster_epoch_of_last_update = -1;
    TensorData cluster_window;  // accumulated embeddings, one row each
    std::vector<int> cluster_window_assignments;
};

/// Binary (CBOR) round trip; writes go through a temp file + rename so a
/// crash never leaves a torn checkpoint behind.
void save_checkpoint_file(const CheckpointData& ckpt, const std::string& path);
CheckpointData load_checkpoint_file(const std::string& path);

TrainConfig checkpoint_train_config(const CheckpointData& ckpt);

// --- tensor conversion ------------------------------------------------------

template <typename S>
TensorData tensor_from(const Mat<S>& m) {
    TensorData t;
    t.shape = {m.rows(), m.cols()};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<double>(m(r, c)));
    return t;
}

template <typename S>
Mat<S> tensor_into(const TensorData& t, const std::string& name) {
    if (t.shape.size() != 2 || t.shape[0] * t.shape[1] != static_cast<long>(t.data.size()))
        throw DataError("checkpoint tensor '" + name + "' has inconsistent shape metadata");
    Mat<S> m(t.shape[0], t.shape[1]);
    std::size_t i = 0;
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) m(r, c) = static_cast<S>(t.data[i++]);
    return m;
}

template <typename S>
void tensor_into_shaped(const TensorData& t, Mat<S>& dst, const std::string& name) {
    Mat<S> m = tensor_into<S>(t, name);
    if (m.rows() != dst.rows() || m.cols() != dst.cols())
        throw DataError("checkpoint tensor '" + name + "' shape " + std::to_string(m.rows()) +
                        "x" + std::to_string(m.cols()) + " does not match expected " +
                        std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()));
    dst = std::move(m);
}

// --- model <-> checkpoint -----------------------------------------------------

template <typename S>
CheckpointData make_checkpoint(const TrainConfig& config, int epoch, const EncoderParams<S>& enc,
                               const ProjectionParams<S>& proj, const AdamState<S>& adam,
                               const ClusterState<S>* clusters) {
    CheckpointData ckpt;
    ckpt.config_hash = config_hash(config);
    ckpt.config_text = canonical_config(config);
    ckpt.epoch = epoch;
    visit_encoder(enc, [&](const std::string& name, const Mat<S>& m) {
        ckpt.encoder[name] = tensor_from(m);
    });
    visit_projection(proj, [&](const std::string& name, const Mat<S>& m) {
        ckpt.projection[name] = tensor_from(m);
    });
    ckpt.adam_step = adam.step;
    for (const auto& m : adam.m) ckpt.adam_m.push_back(tensor_from(m));
    for (const auto& v : adam.v) ckpt.adam_v.push_back(tensor_from(v));
    if (clusters && clusters->initialized()) {
        ckpt.has_clusters = true;
        ckpt.cluster_means = tensor_from(clusters->means);
        ckpt.cluster_accum_sum = tensor_from(clusters->accum_sum);
        ckpt.cluster_accum_count = clusters->accum_count;
        ckpt.cluster_epoch_of_last_update = clusters->epoch_of_last_update;
        Mat<S> window(static_cast<long>(clusters->window_embeddings.size()),
                      clusters->means.cols());
        for (std::size_t i = 0; i < clusters->window_embeddings.size(); ++i)
            window.row(static_cast<long>(i)) = clusters->window_embeddings[i];
        ckpt.cluster_window = tensor_from(window);
        ckpt.cluster_window_assignments = clusters->window_assignments;
    }
    return ckpt;
}

template <typename S>
struct RestoredModel {
    TrainConfig config;
    int epoch = 0;
    EncoderParams<S> encoder;
    ProjectionParams<S> projection;
    AdamState<S> adam;
    ClusterState<S> clusters;
    bool has_clusters = false;
};

template <typename S>
RestoredModel<S> restore_model(const CheckpointData& ckpt) {
    RestoredModel<S> model;
    model.config = checkpoint_train_config(ckpt);
    model.epoch = ckpt.epoch;

    NetSizes sizes = net_sizes_from_preset(model.config.preset);
    auto rng = make_rng(0);  // shapes only; values are overwritten below
    model.encoder = make_encoder<S>(sizes, rng);
    model.projection = make_projection<S>(sizes, rng);

    visit_encoder(model.encoder, [&](const std::string& name, Mat<S>& m) {
        auto it = ckpt.encoder.find(name);
        if (it == ckpt.encoder.end()) throw DataError("checkpoint missing tensor " + name);
        tensor_into_shaped(it->second, m, name);
    });
    visit_projection(model.projection, [&](const std::string& name, Mat<S>& m) {
        auto it = ckpt.projection.find(name);
        if (it == ckpt.projection.end()) throw DataError("checkpoint missing tensor " + name);
        tensor_into_shaped(it->second, m, name);
    });

    model.adam = make_adam(collect_tensors(model.encoder, model.projection), model.config.adam);
    model.adam.step = ckpt.adam_step;
    if (!ckpt.adam_m.empty()) {
        if (ckpt.adam_m.size() != model.adam.m.size() || ckpt.adam_v.size() != model.adam.v.size())
            throw DataError("checkpoint optimizer state arity mismatch");
        for (std::size_t i = 0; i < ckpt.adam_m.size(); ++i) {
            tensor_into_shaped(ckpt.adam_m[i], model.adam.m[i], "adam.m");
            tensor_into_shaped(ckpt.adam_v[i], model.adam.v[i], "adam.v");
        }
    }

    if (ckpt.has_clusters) {
        model.has_clusters = true;
        model.clusters = make_cluster_state(tensor_into<S>(ckpt.cluster_means, "cluster.means"));
        tensor_into_shaped(ckpt.cluster_accum_sum, model.clusters.accum_sum, "cluster.accum_sum");
        model.clusters.accum_count = ckpt.cluster_accum_count;
        model.clusters.epoch_of_last_update = ckpt.cluster_epoch_of_last_update;
        Mat<S> window = tensor_into<S>(ckpt.cluster_window, "cluster.window");
        for (long r = 0; r < window.rows(); ++r)
            model.clusters.window_embeddings.emplace_back(window.row(r));
        model.clusters.window_assignments = ckpt.cluster_window_assignments;
    }
    return model;
}

}  // namespace walkfeat
