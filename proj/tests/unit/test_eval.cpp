#include <algorithm>
#include <random>

#include "doctest.h"
#include "walkfeat/eval.hpp"

using namespace walkfeat;

namespace {

FeatureVector fv(const std::string& id, const std::string& label, std::vector<double> values) {
    return FeatureVector{std::move(values), id, label};
}

// Independent brute-force mAP: selection-sort ranking plus a direct
// evaluation of the precision-sum formula. Shares no code with the library
// implementation.
double brute_force_map(const std::vector<FeatureVector>& items,
                       const std::vector<std::string>& query_ids) {
    double total = 0.0;
    int counted = 0;
    for (const auto& qid : query_ids) {
        std::size_t q = 0;
        while (items[q].source_id != qid) ++q;

        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < items.size(); ++i)
            if (i != q) rest.push_back(i);

        // selection sort by (distance, source_id)
        auto dist = [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t d = 0; d < items[i].values.size(); ++d) {
                double diff = items[i].values[d] - items[q].values[d];
                s += diff * diff;
            }
            return std::sqrt(s);
        };
        for (std::size_t a = 0; a < rest.size(); ++a) {
            std::size_t best = a;
            for (std::size_t b = a + 1; b < rest.size(); ++b) {
                double db = dist(rest[b]), dbest = dist(rest[best]);
                if (db < dbest ||
                    (db == dbest && items[rest[b]].source_id < items[rest[best]].source_id))
                    best = b;
            }
            std::swap(rest[a], rest[best]);
        }

        int relevant = 0;
        for (std::size_t i : rest)
            if (items[i].label == items[q].label) ++relevant;
        if (relevant == 0) continue;

        double ap = 0.0;
        int hits = 0;
        for (std::size_t rank = 0; rank < rest.size(); ++rank) {
            if (items[rest[rank]].label == items[q].label) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
            }
        }
        total += ap / relevant;
        ++counted;
    }
    return total / counted;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("retrieve ranks an identical feature first") {
    auto index = build_index({fv("a", "x", {1, 2, 3}), fv("b", "x", {1, 2, 3}),
                              fv("c", "y", {9, 9, 9})});
    auto ranked = retrieve(index, "a", 2);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0] == "b");
}

TEST_CASE("retrieve clamps k and excludes the query") {
    auto index = build_index({fv("a", "x", {0, 0}), fv("b", "x", {1, 0}), fv("c", "y", {5, 0})});
    auto ranked = retrieve(index, "a", 100);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked == std::vector<std::string>{"b", "c"});
    CHECK_THROWS_AS(retrieve(index, "missing", 2), DataError);
}

TEST_CASE("distance ties order by source_id") {
    auto index = build_index({fv("q", "x", {0, 0}), fv("zz", "x", {1, 0}), fv("aa", "x", {0, 1})});
    auto ranked = retrieve(index, "q", 2);
    CHECK(ranked == std::vector<std::string>{"aa", "zz"});
}

TEST_CASE("build_index validates input") {
    CHECK_THROWS_AS(build_index({}), DataError);
    CHECK_THROWS_AS(build_index({fv("a", "x", {1}), fv("a", "x", {2})}), DataError);
    CHECK_THROWS_AS(build_index({fv("a", "x", {1}), fv("b", "x", {1, 2})}), DataError);
}

TEST_CASE("average precision hand cases") {
    CHECK(average_precision({1, 1, 0, 0}, 2) == doctest::Approx(1.0));
    CHECK(average_precision({1, 0, 1, 0}, 2) == doctest::Approx(0.83333).epsilon(1e-5));
    CHECK(average_precision({1, 0, 1, 0}, 2) == doctest::Approx(0.5 * (1.0 + 2.0 / 3.0)));
    CHECK(average_precision({0, 0, 0, 0}, 2) == doctest::Approx(0.0));
    CHECK_THROWS_AS(average_precision({1, 0}, 0), DataError);
}

TEST_CASE("AP is 1 exactly when relevant items lead the ranking") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 30; ++t) {
        int r = 1 + static_cast<int>(rng() % 5), n = r + static_cast<int>(rng() % 6);
        std::vector<int> rel(n, 0);
        std::fill(rel.begin(), rel.begin() + r, 1);
        CHECK(average_precision(rel, r) == doctest::Approx(1.0));
        if (n > r) {
            std::swap(rel[r - 1], rel[n - 1]);  // push one relevant item to the end
            CHECK(average_precision(rel, r) < 1.0);
        }
    }
}

TEST_CASE("perfectly separated classes give mAP 1") {
    auto index = build_index({fv("a1", "a", {0, 0}), fv("a2", "a", {0.1, 0}),
                              fv("b1", "b", {100, 0}), fv("b2", "b", {100.1, 0})});
    RetrievalReport report = mean_average_precision(index, {"a1", "a2", "b1", "b2"});
    CHECK(report.map == doctest::Approx(1.0));
    CHECK(report.per_class_ap.at("a") == doctest::Approx(1.0));
    CHECK(report.queries == 4);
}

TEST_CASE("singleton-class queries are skipped with a count") {
    auto index = build_index({fv("a1", "a", {0, 0}), fv("a2", "a", {1, 0}),
                              fv("lone", "z", {50, 0})});
    RetrievalReport report = mean_average_precision(index, {"a1", "lone"});
    CHECK(report.queries == 1);
    CHECK(report.skipped == 1);
}

TEST_CASE("random features score near the class prior") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> coord(-1, 1);
    const int classes = 5, per_class = 30;
    std::vector<FeatureVector> items;
    std::vector<std::string> queries;
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            std::string id = "m" + std::to_string(c) + "_" + std::to_string(i);
            items.push_back(fv(id, "class" + std::to_string(c), {coord(rng), coord(rng)}));
            queries.push_back(id);
        }
    }
    RetrievalReport report = mean_average_precision(build_index(items), queries);
    // prior is ~1/5; allow the sanity band 0.5/C .. 2/C
    CHECK(report.map > 0.5 / classes);
    CHECK(report.map < 2.0 / classes);
}

TEST_CASE("mAP matches the brute-force oracle to 1e-12 on 50 random instances") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coord(-2, 2);
    for (int instance = 0; instance < 50; ++instance) {
        int n = 6 + static_cast<int>(rng() % 35);       // up to 40 items
        int classes = 2 + static_cast<int>(rng() % 4);  // up to 5 classes
        std::vector<FeatureVector> items;
        std::vector<std::string> queries;
        for (int i = 0; i < n; ++i) {
            std::string id = "it" + std::to_string(i);
            std::string label = "c" + std::to_string(static_cast<int>(rng() % classes));
            items.push_back(fv(id, label, {coord(rng), coord(rng), coord(rng)}));
            queries.push_back(id);
        }
        // ensure at least one scorable query
        items.push_back(fv("anchor1", "c0", {coord(rng), coord(rng), coord(rng)}));
        items.push_back(fv("anchor2", "c0", {coord(rng), coord(rng), coord(rng)}));
        queries.push_back("anchor1");

        RetrievalReport report = mean_average_precision(build_index(items), queries);
        double oracle = brute_force_map(items, queries);
        CHECK(report.map == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("retrieval is invariant to a global feature translation") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> coord(-1, 1);
    std::vector<FeatureVector> items;
    std::vector<std::string> queries;
    for (int i = 0; i < 12; ++i) {
        items.push_back(fv("m" + std::to_string(i), "c" + std::to_string(i % 3),
                           {coord(rng), coord(rng)}));
        queries.push_back(items.back().source_id);
    }
    double base = mean_average_precision(build_index(items), queries).map;
    for (auto& f : items) {
        f.values[0] += 1000.0;
        f.values[1] -= 77.0;
    }
    CHECK(mean_average_precision(build_index(items), queries).map ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("svm separates two far blobs perfectly") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<FeatureVector> train;
    for (int i = 0; i < 20; ++i) {
        train.push_back(fv("a" + std::to_string(i), "left", {-5 + noise(rng), noise(rng)}));
        train.push_back(fv("b" + std::to_string(i), "right", {5 + noise(rng), noise(rng)}));
    }
    SvmConfig cfg;
    cfg.seed = 1;
    SvmModel model = svm_train(train, cfg);

    std::vector<std::string> predictions, labels;
    for (const auto& f : train) {
        predictions.push_back(svm_predict(model, f.values));
        labels.push_back(f.label);
    }
    CHECK(accuracy(predictions, labels) == doctest::Approx(1.0));
}

TEST_CASE("shuffled labels collapse held-out accuracy to the prior") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<FeatureVector> train, held_out;
    for (int i = 0; i < 40; ++i) {
        std::string label = rng() % 2 ? "left" : "right";  // labels independent of features
        train.push_back(
            fv("t" + std::to_string(i), label, {(i % 2 ? -5.0 : 5.0) + noise(rng), noise(rng)}));
    }
    for (int i = 0; i < 40; ++i) {
        std::string label = rng() % 2 ? "left" : "right";
        held_out.push_back(
            fv("h" + std::to_string(i), label, {(i % 2 ? -5.0 : 5.0) + noise(rng), noise(rng)}));
    }
    SvmConfig cfg;
    cfg.seed = 2;
    SvmModel model = svm_train(train, cfg);
    std::vector<std::string> predictions, labels;
    for (const auto& f : held_out) {
        predictions.push_back(svm_predict(model, f.values));
        labels.push_back(f.label);
    }
    double acc = accuracy(predictions, labels);
    CHECK(acc > 0.2);
    CHECK(acc < 0.8);
}

TEST_CASE("svm objective settles downward over epochs") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<FeatureVector> train;
    for (int i = 0; i < 30; ++i) {
        train.push_back(fv("a" + std::to_string(i), "l", {-2 + noise(rng), noise(rng)}));
        train.push_back(fv("b" + std::to_string(i), "r", {2 + noise(rng), noise(rng)}));
    }
    SvmConfig cfg;
    cfg.epochs = 40;
    cfg.seed = 3;
    SvmModel model = svm_train(train, cfg);
    REQUIRE(model.objective_trace.size() == 40);
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) head += model.objective_trace[static_cast<std::size_t>(i)];
    for (int i = 30; i < 40; ++i) tail += model.objective_trace[static_cast<std::size_t>(i)];
    CHECK(tail <= head);
}

TEST_CASE("svm training is deterministic per seed") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<FeatureVector> train;
    for (int i = 0; i < 10; ++i) {
        train.push_back(fv("a" + std::to_string(i), "l", {-1 + noise(rng), noise(rng)}));
        train.push_back(fv("b" + std::to_string(i), "r", {1 + noise(rng), noise(rng)}));
    }
    SvmConfig cfg;
    cfg.seed = 9;
    SvmModel m1 = svm_train(train, cfg);
    SvmModel m2 = svm_train(train, cfg);
    CHECK(m1.weights == m2.weights);
    CHECK(m1.bias == m2.bias);
}

TEST_CASE("zero weights predict the lowest class index") {
    SvmModel model;
    model.classes = {"alpha", "beta"};
    model.weights = Eigen::MatrixXd::Zero(2, 3);
    model.bias = Eigen::VectorXd::Zero(2);
    model.feat_mean = Eigen::VectorXd::Zero(3);
    model.feat_std = Eigen::VectorXd::Ones(3);
    CHECK(svm_predict(model, {1.0, 2.0, 3.0}) == "alpha");
    CHECK_THROWS_AS(svm_predict(model, {1.0}), DataError);
}

TEST_CASE("svm rejects degenerate training sets") {
    CHECK_THROWS_AS(svm_train({}, SvmConfig{}), DataError);
    CHECK_THROWS_AS(svm_train({fv("a", "only", {1, 2}), fv("b", "only", {2, 1})}, SvmConfig{}),
                    DataError);
    CHECK_THROWS_AS(svm_train({fv("a", "", {1, 2}), fv("b", "x", {2, 1})}, SvmConfig{}), DataError);
}

TEST_CASE("accuracy arithmetic") {
    CHECK(accuracy({"a", "b"}, {"a", "b"}) == doctest::Approx(1.0));
    CHECK(accuracy({"a", "b"}, {"b", "a"}) == doctest::Approx(0.0));
    CHECK(accuracy({"a", "b", "c", "d"}, {"a", "b", "c", "x"}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(accuracy({}, {}), DataError);
    CHECK_THROWS_AS(accuracy({"a"}, {}), DataError);
}

TEST_CASE("svm_evaluate fills the confusion matrix") {
    std::vector<FeatureVector> train{fv("a1", "l", {-5, 0}), fv("a2", "l", {-4, 0}),
                                     fv("b1", "r", {5, 0}), fv("b2", "r", {4, 0})};
    SvmConfig cfg;
    cfg.epochs = 50;
    SvmModel model = svm_train(train, cfg);
    ClassificationReport report = svm_evaluate(model, train);
    CHECK(report.accuracy == doctest::Approx(1.0));
    REQUIRE(report.classes.size() == 2);
    CHECK(report.confusion[0][0] == 2);
    CHECK(report.confusion[1][1] == 2);
    CHECK(report.confusion[0][1] == 0);
}

}  // TEST_SUITE
