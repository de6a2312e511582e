#include <cstdio>
#include <fstream>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "walkfeat/dataset.hpp"
#include "walkfeat/eval.hpp"
#include "walkfeat/pipeline.hpp"
#include "walkfeat/rng.hpp"
#include "walkfeat/synthetic.hpp"

using namespace walkfeat;
namespace fs = std::filesystem;

namespace {

std::vector<ModelGroup> toy_dataset(int count, std::uint64_t seed) {
    std::vector<ModelGroup> groups;
    const SyntheticClass classes[] = {SyntheticClass::Sphere, SyntheticClass::Box,
                                      SyntheticClass::Cylinder, SyntheticClass::Torus,
                                      SyntheticClass::Cone};
    SynthParams params;
    params.subdivisions = 1;
    params.segments = 10;
    params.rings = 6;
    for (int i = 0; i < count; ++i) {
        Mesh m = normalize_mesh(gen_synthetic(classes[i % 5], params, seed + i));
        m.source_id = "toy-" + std::to_string(i);
        groups.push_back(
            ModelGroup{m.source_id, {WalkMesh{m, build_adjacency(m)}}});
    }
    return groups;
}

TrainConfig toy_config() {
    TrainConfig cfg;
    cfg.preset = "desk";
    cfg.precision = "f32";
    cfg.batch_size = 4;
    cfg.walk_len = 12;
    cfg.epochs = 1;
    cfg.loss.clusters = 4;
    cfg.loss.cluster_start_epoch = 50;
    cfg.seed = 7;
    return cfg;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("walkfeat-test-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("one toy epoch produces a checkpoint and a finite trace") {
    TempDir dir;
    auto dataset = toy_dataset(10, 1);
    TrainResult result = train(toy_config(), dataset, dir.path.string());

    CHECK(fs::exists(dir.path / "checkpoint.cbor"));
    REQUIRE(result.trace.size() == 3);  // ceil(10 / 4) batches
    for (const auto& row : result.trace) {
        CHECK(std::isfinite(row.total));
        CHECK(row.kmeans == 0.0);  // schedule not reached
        CHECK(row.total == doctest::Approx(row.nt_xent));
    }
    CHECK(result.checkpoint.epoch == 1);
}

TEST_CASE("training is bitwise deterministic per seed") {
    auto dataset = toy_dataset(8, 2);
    TrainConfig cfg = toy_config();
    cfg.epochs = 2;
    TrainResult a = train(cfg, dataset);
    TrainResult b = train(cfg, dataset);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].total == b.trace[i].total);
        CHECK(a.trace[i].nt_xent == b.trace[i].nt_xent);
    }
    CHECK(a.checkpoint.encoder.at("fc1.W").data == b.checkpoint.encoder.at("fc1.W").data);
}

TEST_CASE("thread count does not change the trajectory") {
    auto dataset = toy_dataset(8, 3);
    TrainConfig cfg = toy_config();
    TrainResult a = train(cfg, dataset);
    cfg.threads = 4;
    TrainResult b = train(cfg, dataset);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].total == b.trace[i].total);
}

TEST_CASE("one optimizer step lowers the loss on a frozen batch") {
    auto rng = make_rng(11);
    NetSizes sizes = NetSizes::desk();
    EncoderParams<double> enc = make_encoder<double>(sizes, rng);
    ProjectionParams<double> proj = make_projection<double>(sizes, rng);

    std::mt19937_64 srng(5);
    std::uniform_real_distribution<double> coord(-1, 1);
    std::vector<StepSequence> seqs;
    for (int b = 0; b < 8; ++b) {
        StepSequence s(10, 3);
        for (int t = 0; t < 10; ++t)
            for (int c = 0; c < 3; ++c) s(t, c) = coord(srng);
        seqs.push_back(std::move(s));
    }

    LossConfig loss_cfg;
    auto eval_loss = [&](bool update) {
        EncoderCache<double> cache;
        Mat<double> features = encoder_forward(enc, seqs, &cache);
        Mat<double> hidden;
        Mat<double> projected = projection_forward(proj, features, &hidden);
        LossValue<double> lv = nt_xent(projected, 0.5);
        if (update) {
            EncoderParams<double> eg = zeros_like(enc);
            ProjectionParams<double> pg = zeros_like(proj);
            Mat<double> dfeat = projection_backward(proj, features, hidden, lv.grads, pg);
            encoder_backward(enc, cache, dfeat, eg);
            auto params = collect_tensors(enc, proj);
            auto grads = collect_tensors(std::as_const(eg), std::as_const(pg));
            AdamConfig acfg;
            acfg.lr = 1e-3;
            AdamState<double> state = make_adam(params, acfg);
            adam_step(params, grads, state);
        }
        return static_cast<double>(lv.loss);
    };

    double before = eval_loss(true);
    double after = eval_loss(false);
    CHECK(after < before);
}

TEST_CASE("clustering kicks in at the scheduled epoch") {
    auto dataset = toy_dataset(8, 4);
    TrainConfig cfg = toy_config();
    cfg.epochs = 4;
    cfg.loss.cluster_start_epoch = 2;
    cfg.loss.clusters = 3;
    cfg.loss.means_update_period = 1;
    TrainResult result = train(cfg, dataset);

    for (const auto& row : result.trace) {
        if (row.epoch < 2) CHECK(row.kmeans == 0.0);
        else CHECK(row.kmeans > 0.0);
    }
    CHECK(result.checkpoint.has_clusters);
}

TEST_CASE("alpha 0 reproduces the pure contrastive trajectory") {
    auto dataset = toy_dataset(8, 5);
    TrainConfig with_clusters = toy_config();
    with_clusters.epochs = 4;
    with_clusters.loss.cluster_start_epoch = 1;
    with_clusters.loss.clusters = 3;
    with_clusters.loss.alpha = 0.0;

    TrainConfig no_clusters = toy_config();
    no_clusters.epochs = 4;
    no_clusters.loss.cluster_start_epoch = 100;  // never reached
    no_clusters.loss.clusters = 3;
    no_clusters.loss.alpha = 0.0;

    TrainResult a = train(with_clusters, dataset);
    TrainResult b = train(no_clusters, dataset);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].nt_xent == b.trace[i].nt_xent);
        CHECK(a.trace[i].total == b.trace[i].total);
    }
    CHECK(a.checkpoint.encoder.at("fc_out.W").data == b.checkpoint.encoder.at("fc_out.W").data);
}

TEST_CASE("select_closest_to_mean matches a sort-based oracle") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> d(-3, 3);
    std::uniform_int_distribution<int> nrows(1, 40);
    for (int trial = 0; trial < 50; ++trial) {
        int n = nrows(rng);
        Mat<double> f(n, 4);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < 4; ++c) f(r, c) = d(rng);

        std::vector<int> got = select_closest_to_mean(f);

        Eigen::RowVectorXd mean = f.colwise().mean();
        std::vector<std::pair<double, int>> order;
        for (int r = 0; r < n; ++r) order.emplace_back((f.row(r) - mean).norm(), r);
        std::stable_sort(order.begin(), order.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<int> expected;
        for (int i = 0; i < (n + 1) / 2; ++i) expected.push_back(order[i].second);
        std::sort(expected.begin(), expected.end());
        CHECK(got == expected);
    }
}

TEST_CASE("two equidistant walks keep the first") {
    Mat<double> f(2, 3);
    f << 1, 0, 0, 0, 1, 0;
    std::vector<int> keep = select_closest_to_mean(f);
    CHECK(keep == std::vector<int>{0});
}

TEST_CASE("an outlier walk is excluded from the average") {
    Mat<double> f(8, 2);
    for (int i = 0; i < 7; ++i) f.row(i) << 1.0 + 0.01 * i, 0.0;
    f.row(7) << 500.0, 500.0;
    std::vector<int> keep = select_closest_to_mean(f);
    CHECK(keep.size() == 4);
    CHECK(std::find(keep.begin(), keep.end(), 7) == keep.end());
}

TEST_CASE("embed_mesh with identical walk features returns that feature") {
    // zero weights, constant fc_out bias: every walk embeds to the bias row
    TrainConfig cfg = toy_config();
    cfg.precision = "f64";
    NetSizes sizes = NetSizes::desk();
    auto rng = make_rng(8);
    EncoderParams<double> enc = make_encoder<double>(sizes, rng);
    ProjectionParams<double> proj = make_projection<double>(sizes, rng);
    visit_encoder(enc, [](const std::string&, Mat<double>& m) { m.setZero(); });
    enc.fc_out.b.setConstant(0.75);
    AdamState<double> adam = make_adam(collect_tensors(enc, proj), cfg.adam);
    CheckpointData ckpt = make_checkpoint<double>(cfg, 1, enc, proj, adam, nullptr);

    Mesh mesh = gen_synthetic(SyntheticClass::Sphere, SynthParams{}, 9);
    mesh.source_id = "s";
    FeatureVector fv = embed_mesh(ckpt, mesh, 8, 42);
    REQUIRE(fv.values.size() == static_cast<std::size_t>(sizes.feature_dim));
    for (double v : fv.values) CHECK(v == doctest::Approx(0.75).epsilon(1e-12));

    CHECK_THROWS_AS(embed_mesh(ckpt, mesh, 1, 42), ConfigError);
}

TEST_CASE("checkpoint round trip preserves embeddings bitwise") {
    TempDir dir;
    auto dataset = toy_dataset(6, 10);
    TrainConfig cfg = toy_config();
    cfg.batch_size = 3;
    TrainResult result = train(cfg, dataset);

    Mesh probe = gen_synthetic(SyntheticClass::Torus, SynthParams{}, 33);
    probe.source_id = "probe";
    FeatureVector before = embed_mesh(result.checkpoint, probe, 4, 5);

    std::string path = (dir.path / "ckpt.cbor").string();
    save_checkpoint_file(result.checkpoint, path);
    CheckpointData loaded = load_checkpoint_file(path);
    CHECK(loaded.config_hash == result.checkpoint.config_hash);

    FeatureVector after = embed_mesh(loaded, probe, 4, 5);
    REQUIRE(before.values.size() == after.values.size());
    for (std::size_t i = 0; i < before.values.size(); ++i)
        CHECK(before.values[i] == after.values[i]);
}

TEST_CASE("embed_dataset embeds the largest version of each model in order") {
    TrainConfig cfg = toy_config();
    cfg.precision = "f64";
    NetSizes sizes = NetSizes::desk();
    auto rng = make_rng(12);
    EncoderParams<double> enc = make_encoder<double>(sizes, rng);
    ProjectionParams<double> proj = make_projection<double>(sizes, rng);
    AdamState<double> adam = make_adam(collect_tensors(enc, proj), cfg.adam);
    CheckpointData ckpt = make_checkpoint<double>(cfg, 1, enc, proj, adam, nullptr);

    SynthParams small;
    small.subdivisions = 1;
    SynthParams big;
    big.subdivisions = 2;
    std::vector<EvalModel> dataset;
    for (int i = 0; i < 3; ++i) {
        EvalModel em;
        em.source_id = "m" + std::to_string(i);
        em.label = "sphere";
        em.versions = {gen_synthetic(SyntheticClass::Sphere, small, 50 + i),
                       gen_synthetic(SyntheticClass::Sphere, big, 50 + i)};
        dataset.push_back(em);
    }

    auto features = embed_dataset(ckpt, dataset, 4, 77);
    REQUIRE(features.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(features[i].source_id == "m" + std::to_string(i));
        CHECK(features[i].label == "sphere");
        CHECK(features[i].values.size() == static_cast<std::size_t>(sizes.feature_dim));
    }

    // deterministic per seed, thread-count independent
    auto again = embed_dataset(ckpt, dataset, 4, 77, 3);
    for (int i = 0; i < 3; ++i) CHECK(features[i].values == again[i].values);
}

TEST_CASE("labels in the manifest cannot influence training") {
    TempDir dir;
    SynthParams params;
    params.subdivisions = 1;
    Manifest labeled, unlabeled;
    for (int i = 0; i < 4; ++i) {
        Mesh m = normalize_mesh(gen_synthetic(SyntheticClass::Box, params, 70 + i));
        std::string file = (dir.path / ("m" + std::to_string(i) + ".off")).string();
        write_mesh_file(m, file);
        ManifestRecord rec;
        rec.path = file;
        rec.source_id = "m" + std::to_string(i);
        rec.face_count = static_cast<int>(m.faces.size());
        rec.split = "train";
        unlabeled.records.push_back(rec);
        rec.label = "decoy-class-" + std::to_string(i);
        labeled.records.push_back(rec);
    }

    TrainConfig cfg = toy_config();
    cfg.batch_size = 2;
    TrainResult a = train(cfg, load_train_groups(labeled, ""));
    TrainResult b = train(cfg, load_train_groups(unlabeled, ""));
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].total == b.trace[i].total);
}

TEST_CASE("trace and embeddings files round trip") {
    TempDir dir;
    std::vector<TraceRow> trace{{0, 0, 1.5, 0.0, 1.5}, {0, 1, 1.25, 0.5, 1.75}};
    std::string trace_path = (dir.path / "trace.csv").string();
    write_trace_csv(trace, trace_path);
    std::ifstream in(trace_path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,batch,nt_xent,kmeans,total");

    std::vector<EmbeddingRecord> records;
    EmbeddingRecord r1;
    r1.feature = FeatureVector{{1.0, 2.0, 3.0}, "a", "sphere"};
    r1.split = "train";
    EmbeddingRecord r2;
    r2.feature = FeatureVector{{-1.0, 0.5, 0.0}, "b", ""};
    r2.split = "test";
    records = {r1, r2};
    std::string emb_path = (dir.path / "embeddings.jsonl").string();
    write_embeddings_jsonl(records, emb_path);
    auto back = read_embeddings_jsonl(emb_path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].feature.values == r1.feature.values);
    CHECK(back[0].feature.label == "sphere");
    CHECK(back[1].split == "test");
    CHECK(back[1].feature.label.empty());
}

TEST_CASE("train refuses a dataset smaller than the batch") {
    auto dataset = toy_dataset(3, 20);
    TrainConfig cfg = toy_config();
    cfg.batch_size = 4;
    CHECK_THROWS_AS(train(cfg, dataset), DataError);
}

}  // TEST_SUITE
