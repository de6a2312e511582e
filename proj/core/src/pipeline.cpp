#include "walkfeat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "walkfeat/losses.hpp"
#include "walkfeat/parallel.hpp"
#include "walkfeat/rng.hpp"

namespace walkfeat {

namespace {

// Builds the 2N paired sequences for one training batch. Walk w of dataset
// model m in epoch e runs on the stream (seed, e, m, w), so batches are
// reproducible regardless of threading.
template <typename S>
WalkBatch build_train_batch(const TrainConfig& cfg, const std::vector<ModelGroup>& data,
                            const std::vector<int>& models, int epoch) {
    WalkBatch batch;
    const int n = static_cast<int>(models.size());
    batch.sequences.resize(2 * static_cast<std::size_t>(n));
    batch.pair_ids.reserve(n);
    for (int i = 0; i < n; ++i) batch.pair_ids.push_back(data[models[i]].source_id);

    parallel_for(2 * n, cfg.threads, [&](int slot) {
        const int model = models[slot / 2];
        const int walk_idx = slot % 2;
        const ModelGroup& group = data[model];
        auto rng = make_rng(derive_seed(cfg.seed, "train_walk", epoch, model, walk_idx));
        std::uniform_int_distribution<int> pick(0, static_cast<int>(group.versions.size()) - 1);
        const WalkMesh& wm = group.versions[pick(rng)];
        Walk walk = random_walk(wm.mesh, wm.adjacency, cfg.walk_len, cfg.jump_prob, rng);
        batch.sequences[slot] = walk_to_sequence(wm.mesh, walk);
    });
    return batch;
}

// Projects every model once (two walks each) to seed the cluster means.
template <typename S>
Mat<S> collect_projected_sample(const TrainConfig& cfg, const std::vector<ModelGroup>& data,
                                const EncoderParams<S>& enc, const ProjectionParams<S>& proj,
                                int epoch) {
    const int m = static_cast<int>(data.size());
    std::vector<StepSequence> seqs(2 * static_cast<std::size_t>(m));
    parallel_for(2 * m, cfg.threads, [&](int slot) {
        const ModelGroup& group = data[slot / 2];
        auto rng = make_rng(derive_seed(cfg.seed, "cluster_seed_walk", epoch, slot));
        std::uniform_int_distribution<int> pick(0, static_cast<int>(group.versions.size()) - 1);
        const WalkMesh& wm = group.versions[pick(rng)];
        Walk walk = random_walk(wm.mesh, wm.adjacency, cfg.walk_len, cfg.jump_prob, rng);
        seqs[slot] = walk_to_sequence(wm.mesh, walk);
    });

    Mat<S> sample(2 * m, net_sizes_from_preset(cfg.preset).proj_dim);
    const int chunk = std::max(2 * cfg.batch_size, 2);
    for (int begin = 0; begin < 2 * m; begin += chunk) {
        int end = std::min(begin + chunk, 2 * m);
        std::vector<StepSequence> part(seqs.begin() + begin, seqs.begin() + end);
        Mat<S> features = encoder_forward<S>(enc, part);
        Mat<S> projected = projection_forward<S>(proj, features);
        sample.middleRows(begin, end - begin) = projected;
    }
    // Means live in the same space the losses see: L2-normalized rows.
    for (long r = 0; r < sample.rows(); ++r) {
        S norm = sample.row(r).norm();
        if (norm > S(0)) sample.row(r) /= norm;
    }
    return sample;
}

template <typename S>
TrainResult train_impl(const TrainConfig& cfg, const std::vector<ModelGroup>& dataset,
                       const std::string& checkpoint_dir) {
    const NetSizes sizes = net_sizes_from_preset(cfg.preset);
    auto init_rng = make_rng(derive_seed(cfg.seed, "init"));
    EncoderParams<S> encoder = make_encoder<S>(sizes, init_rng);
    ProjectionParams<S> projection = make_projection<S>(sizes, init_rng);
    AdamState<S> adam = make_adam(collect_tensors(encoder, projection), cfg.adam);

    EncoderParams<S> enc_grads = zeros_like(encoder);
    ProjectionParams<S> proj_grads = zeros_like(projection);
    const std::vector<Mat<S>*> params = collect_tensors(encoder, projection);
    const std::vector<const Mat<S>*> grads =
        collect_tensors(std::as_const(enc_grads), std::as_const(proj_grads));

    ClusterState<S> clusters;
    TrainResult result;

    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch == cfg.loss.cluster_start_epoch) {
            Mat<S> sample = collect_projected_sample(cfg, dataset, encoder, projection, epoch);
            auto krng = make_rng(derive_seed(cfg.seed, "kmeans_init", epoch));
            clusters = make_cluster_state(kmeans_init(sample, cfg.loss.clusters, krng));
            clusters.epoch_of_last_update = epoch;
        }

        auto order_rng = make_rng(derive_seed(cfg.seed, "epoch_order", epoch));
        std::shuffle(order.begin(), order.end(), order_rng);

        int batch_index = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
            std::size_t end = std::min(begin + cfg.batch_size, order.size());
            std::vector<int> models(order.begin() + begin, order.begin() + end);

            WalkBatch batch = build_train_batch<S>(cfg, dataset, models, epoch);

            EncoderCache<S> cache;
            Mat<S> features = encoder_forward<S>(encoder, batch.sequences, &cache);
            Mat<S> hidden;
            Mat<S> projected = projection_forward<S>(projection, features, &hidden);

            CombinedLoss<S> loss = combined_loss<S>(
                projected, clusters.initialized() ? &clusters : nullptr, cfg.loss, epoch);
            if (!std::isfinite(static_cast<double>(loss.total)))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_index));

            visit_encoder(enc_grads, [](const std::string&, Mat<S>& m) { m.setZero(); });
            visit_projection(proj_grads, [](const std::string&, Mat<S>& m) { m.setZero(); });
            Mat<S> dfeatures =
                projection_backward<S>(projection, features, hidden, loss.grads, proj_grads);
            encoder_backward<S>(encoder, cache, dfeatures, enc_grads);
            adam_step(params, grads, adam);

            result.trace.push_back(TraceRow{epoch, batch_index,
                                            static_cast<double>(loss.contrastive),
                                            static_cast<double>(loss.clustering),
                                            static_cast<double>(loss.total)});
        }

        if (clusters.initialized() &&
            (epoch - cfg.loss.cluster_start_epoch + 1) % cfg.loss.means_update_period == 0) {
            update_means(clusters, epoch);
        }

        if (!checkpoint_dir.empty()) {
            CheckpointData ckpt =
                make_checkpoint(cfg, epoch + 1, encoder, projection, adam,
                                clusters.initialized() ? &clusters : nullptr);
            save_checkpoint_file(ckpt, (std::filesystem::path(checkpoint_dir) / "checkpoint.cbor")
                                           .string());
        }
    }

    result.checkpoint = make_checkpoint(cfg, cfg.epochs, encoder, projection, adam,
                                        clusters.initialized() ? &clusters : nullptr);
    return result;
}

template <typename S>
FeatureVector embed_one(const RestoredModel<S>& model, const Mesh& raw_mesh, int n_walks,
                        std::uint64_t walk_seed_base) {
    Mesh mesh = normalize_mesh(raw_mesh);
    Adjacency adj = build_adjacency(mesh);

    std::vector<StepSequence> seqs(static_cast<std::size_t>(n_walks));
    for (int w = 0; w < n_walks; ++w) {
        auto rng = make_rng(combine_seed(walk_seed_base, static_cast<std::uint64_t>(w)));
        Walk walk =
            random_walk(mesh, adj, model.config.walk_len, model.config.jump_prob, rng);
        seqs[static_cast<std::size_t>(w)] = walk_to_sequence(mesh, walk);
    }

    Mat<S> features = encoder_forward<S>(model.encoder, seqs);
    Mat<double> features64 = features.template cast<double>();
    std::vector<int> keep = select_closest_to_mean(features64);

    Eigen::RowVectorXd avg = Eigen::RowVectorXd::Zero(features64.cols());
    for (int idx : keep) avg += features64.row(idx);
    avg /= static_cast<double>(keep.size());

    FeatureVector out;
    out.source_id = raw_mesh.source_id;
    out.label = raw_mesh.label;
    out.values.assign(avg.data(), avg.data() + avg.size());
    return out;
}

const Mesh& largest_version(const EvalModel& model) {
    if (model.versions.empty())
        throw DataError("model " + model.source_id + " has no mesh versions");
    const Mesh* best = &model.versions.front();
    for (const Mesh& m : model.versions)
        if (m.faces.size() > best->faces.size()) best = &m;
    return *best;
}

}  // namespace

std::vector<int> select_closest_to_mean(const Mat<double>& features) {
    const int n = static_cast<int>(features.rows());
    if (n < 1) throw DataError("select_closest_to_mean: empty feature set");
    Eigen::RowVectorXd mean = features.colwise().mean();
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = (features.row(i) - mean).norm();

    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    // stable sort keeps the earlier walk on exact distance ties
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
    });
    const int keep = (n + 1) / 2;
    idx.resize(static_cast<std::size_t>(keep));
    std::sort(idx.begin(), idx.end());
    return idx;
}

TrainResult train(const TrainConfig& config, const std::vector<ModelGroup>& dataset,
                  const std::string& checkpoint_dir) {
    validate_train_config(config);
    if (static_cast<int>(dataset.size()) < config.batch_size)
        throw DataError("dataset has " + std::to_string(dataset.size()) +
                        " models but batch_size is " + std::to_string(config.batch_size));
    if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);
    if (config.precision == "f64") return train_impl<double>(config, dataset, checkpoint_dir);
    return train_impl<float>(config, dataset, checkpoint_dir);
}

FeatureVector embed_mesh(const CheckpointData& checkpoint, const Mesh& mesh, int n_walks,
                         std::uint64_t seed) {
    if (n_walks < 2) throw ConfigError("embed_mesh needs at least 2 walks");
    TrainConfig cfg = checkpoint_train_config(checkpoint);
    const std::uint64_t base = derive_seed(seed, "embed", 0);
    if (cfg.precision == "f64")
        return embed_one(restore_model<double>(checkpoint), mesh, n_walks, base);
    return embed_one(restore_model<float>(checkpoint), mesh, n_walks, base);
}

namespace {

template <typename S>
std::vector<FeatureVector> embed_dataset_impl(const CheckpointData& checkpoint,
                                              const std::vector<EvalModel>& dataset, int n_walks,
                                              std::uint64_t seed, int threads) {
    RestoredModel<S> model = restore_model<S>(checkpoint);
    std::vector<FeatureVector> out(dataset.size());
    parallel_for(static_cast<int>(dataset.size()), threads, [&](int i) {
        const EvalModel& em = dataset[static_cast<std::size_t>(i)];
        Mesh mesh = largest_version(em);
        mesh.source_id = em.source_id;
        mesh.label = em.label;
        out[static_cast<std::size_t>(i)] =
            embed_one(model, mesh, n_walks, derive_seed(seed, "embed", i));
    });
    return out;
}

}  // namespace

std::vector<FeatureVector> embed_dataset(const CheckpointData& checkpoint,
                                         const std::vector<EvalModel>& dataset, int n_walks,
                                         std::uint64_t seed, int threads) {
    if (n_walks < 2) throw ConfigError("embed_dataset needs at least 2 walks");
    TrainConfig cfg = checkpoint_train_config(checkpoint);
    if (cfg.precision == "f64")
        return embed_dataset_impl<double>(checkpoint, dataset, n_walks, seed, threads);
    return embed_dataset_impl<float>(checkpoint, dataset, n_walks, seed, threads);
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open trace file for writing: " + path);
    out << "epoch,batch,nt_xent,kmeans,total\n";
    char buf[160];
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g\n", row.epoch, row.batch,
                      row.nt_xent, row.kmeans, row.total);
        out << buf;
    }
    if (!out) throw DataError("trace write failed: " + path);
}

void write_embeddings_jsonl(const std::vector<EmbeddingRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open embeddings file for writing: " + path);
    for (const auto& rec : records) {
        nlohmann::json j{{"source_id", rec.feature.source_id},
                         {"vector", rec.feature.values},
                         {"split", rec.split}};
        if (!rec.feature.label.empty()) j["label"] = rec.feature.label;
        else j["label"] = nullptr;
        out << j.dump() << "\n";
    }
    if (!out) throw DataError("embeddings write failed: " + path);
}

std::vector<EmbeddingRecord> read_embeddings_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embeddings file: " + path);
    std::vector<EmbeddingRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            EmbeddingRecord rec;
            rec.feature.source_id = j.at("source_id").get<std::string>();
            rec.feature.values = j.at("vector").get<std::vector<double>>();
            if (j.contains("label") && !j["label"].is_null())
                rec.feature.label = j["label"].get<std::string>();
            if (j.contains("split")) rec.split = j["split"].get<std::string>();
            out.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace walkfeat
