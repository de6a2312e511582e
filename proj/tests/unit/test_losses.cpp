#include <random>

#include "doctest.h"
#include "walkfeat/losses.hpp"
#include "walkfeat/rng.hpp"

using namespace walkfeat;

namespace {

Mat<double> random_matrix(long rows, long cols, std::uint64_t seed, double lo = -1.0,
                          double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    Mat<double> m(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) m(r, c) = d(rng);
    return m;
}

RowVec<double> rv(std::initializer_list<double> values) {
    RowVec<double> v(static_cast<long>(values.size()));
    long i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("cosine similarity basics") {
    CHECK(cosine_sim<double>(rv({1, 0}), rv({0, 1})) == doctest::Approx(0.0));
    RowVec<double> v = rv({0.3, -2.0, 5.5});
    CHECK(cosine_sim<double>(v, v) == doctest::Approx(1.0));
    CHECK(cosine_sim<double>(rv({1, 1}), rv({1, 0})) == doctest::Approx(0.70710678).epsilon(1e-8));
    CHECK_THROWS_AS(cosine_sim<double>(rv({0, 0}), rv({1, 0})), NumericError);
}

TEST_CASE("nt_xent is zero for a single pair") {
    Mat<double> batch = random_matrix(2, 6, 1);
    LossValue<double> lv = nt_xent(batch, 0.5);
    CHECK(lv.loss == 0.0);
}

TEST_CASE("nt_xent on orthogonal duplicated pairs matches the closed form") {
    // rows: (1,0), (1,0), (0,1), (0,1); tau = 1.
    // each anchor: -log(e / (e + 2)) = log(1 + 2/e) = 0.5514447...
    Mat<double> batch(4, 2);
    batch << 1, 0, 1, 0, 0, 1, 0, 1;
    LossValue<double> lv = nt_xent(batch, 1.0);
    CHECK(lv.loss == doctest::Approx(0.55144).epsilon(2e-5));
    CHECK(lv.loss == doctest::Approx(std::log(1.0 + 2.0 / std::exp(1.0))).epsilon(1e-12));
}

TEST_CASE("nt_xent is invariant to positive rescaling of a row") {
    Mat<double> batch = random_matrix(8, 5, 2);
    double base = nt_xent(batch, 0.5).loss;
    batch.row(3) *= 42.0;
    CHECK(nt_xent(batch, 0.5).loss == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("nt_xent rejects malformed batches") {
    CHECK_THROWS_AS(nt_xent(random_matrix(3, 4, 3), 0.5), DataError);
    Mat<double> with_zero = random_matrix(4, 4, 4);
    with_zero.row(2).setZero();
    CHECK_THROWS_AS(nt_xent(with_zero, 0.5), NumericError);
    CHECK_THROWS_AS(nt_xent(random_matrix(4, 4, 5), -1.0), ConfigError);
}

TEST_CASE("raising a positive-pair similarity never raises the loss") {
    // Build embeddings from a correlation matrix so every other pairwise
    // similarity can be held exactly fixed while sim(0,1) grows.
    std::mt19937_64 rng(6);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 15; ++trial) {
        Mat<double> a = random_matrix(6, 6, 100 + trial);
        Mat<double> corr = a * a.transpose();
        Eigen::VectorXd d = corr.diagonal().array().sqrt().inverse();
        corr = d.asDiagonal() * corr * d.asDiagonal();
        Mat<double> g = 0.8 * corr + 0.2 * Mat<double>::Identity(6, 6);
        g.diagonal().setOnes();

        Mat<double> g2 = g;
        g2(0, 1) += 0.05;
        g2(1, 0) += 0.05;

        Eigen::LLT<Mat<double>> llt(g), llt2(g2);
        if (llt.info() != Eigen::Success || llt2.info() != Eigen::Success) continue;
        ++checked;

        double before = nt_xent(Mat<double>(llt.matrixL()), 0.5).loss;
        double after = nt_xent(Mat<double>(llt2.matrixL()), 0.5).loss;
        CHECK(after <= before + 1e-12);
    }
    CHECK(checked >= 10);
}

TEST_CASE("nt_xent gradients match finite differences below 1e-5") {
    Mat<double> batch = random_matrix(8, 8, 7);  // N = 4 pairs, d = 8
    LossValue<double> lv = nt_xent(batch, 0.5);

    std::vector<Mat<double>*> params{&batch};
    std::vector<const Mat<double>*> analytic{&lv.grads};
    double err = grad_check(
        params, analytic, [&] { return nt_xent(batch, 0.5).loss; }, 1e-6, 64, 9);
    CHECK(err < 1e-5);
}

TEST_CASE("kmeans_init base case and errors") {
    Mat<double> sample = random_matrix(5, 3, 8);
    auto rng = make_rng(1);
    Mat<double> one = kmeans_init(sample, 1, rng);
    REQUIRE(one.rows() == 1);
    bool found = false;
    for (int i = 0; i < 5; ++i)
        if (one.row(0) == sample.row(i)) found = true;
    CHECK(found);

    auto rng2 = make_rng(2);
    CHECK_THROWS_AS(kmeans_init(sample, 6, rng2), DataError);
}

TEST_CASE("kmeans_init splits far-apart clusters almost surely") {
    // two clusters of 5 points, separation 100x the spread
    Mat<double> sample(10, 2);
    std::mt19937_64 noise(3);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    for (int i = 0; i < 5; ++i) sample.row(i) << jitter(noise), jitter(noise);
    for (int i = 5; i < 10; ++i) sample.row(i) << 100.0 + jitter(noise), jitter(noise);

    int split = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        auto rng = make_rng(1000 + t);
        Mat<double> means = kmeans_init(sample, 2, rng);
        bool a_low = means(0, 0) < 50.0, b_low = means(1, 0) < 50.0;
        if (a_low != b_low) ++split;
    }
    CHECK(static_cast<double>(split) / trials > 0.99);
}

TEST_CASE("assign_pair picks the mean closest to either feature") {
    Mat<double> means(2, 2);
    means << 0, 2, 9, 0;
    CHECK(assign_pair<double>(rv({0, 0}), rv({10, 0}), means) == 1);
    // permutation invariance
    CHECK(assign_pair<double>(rv({10, 0}), rv({0, 0}), means) == 1);

    Mat<double> means4(4, 2);
    means4 << 5, 5, 1, 1, 2, 2, 3, 3;
    CHECK(assign_pair<double>(rv({3, 3}), rv({3, 3}), means4) == 3);  // exact zero distance

    Mat<double> tie(3, 1);
    tie << 1, 5, 1;  // clusters 0 and 2 tie exactly
    CHECK(assign_pair<double>(rv({1.0}), rv({1.0}), tie) == 0);
}

TEST_CASE("assign_pair is permutation invariant on random input") {
    Mat<double> means = random_matrix(6, 4, 10);
    for (int t = 0; t < 50; ++t) {
        RowVec<double> x1 = random_matrix(1, 4, 200 + t).row(0);
        RowVec<double> x2 = random_matrix(1, 4, 300 + t).row(0);
        CHECK(assign_pair<double>(x1, x2, means) == assign_pair<double>(x2, x1, means));
    }
}

TEST_CASE("kmeans_loss hand cases") {
    Mat<double> means(1, 2);
    means << 1, 0;
    Mat<double> batch(2, 2);
    batch << 0, 0, 2, 0;
    LossValue<double> lv = kmeans_loss(batch, {0}, means);
    CHECK(lv.loss == doctest::Approx(1.0));
    // grad on row 0: 2 * ((0,0) - (1,0)) / 2 = (-1, 0)
    CHECK(lv.grads(0, 0) == doctest::Approx(-1.0));
    CHECK(lv.grads(1, 0) == doctest::Approx(1.0));

    Mat<double> at_mean(2, 2);
    at_mean << 1, 0, 1, 0;
    CHECK(kmeans_loss(at_mean, {0}, means).loss == 0.0);

    CHECK_THROWS_AS(kmeans_loss(batch, {5}, means), DataError);
    CHECK_THROWS_AS(kmeans_loss(batch, {0, 0}, means), DataError);
}

TEST_CASE("kmeans_loss gradient matches finite differences below 1e-6") {
    Mat<double> means = random_matrix(3, 5, 11);
    Mat<double> batch = random_matrix(6, 5, 12);
    std::vector<int> assignments{2, 0, 1};
    LossValue<double> lv = kmeans_loss(batch, assignments, means);

    std::vector<Mat<double>*> params{&batch};
    std::vector<const Mat<double>*> analytic{&lv.grads};
    double err = grad_check(
        params, analytic, [&] { return kmeans_loss(batch, assignments, means).loss; }, 1e-6, 30,
        13);
    CHECK(err < 1e-6);
}

TEST_CASE("update_means averages accumulated vectors") {
    ClusterState<double> state = make_cluster_state(Mat<double>(random_matrix(1, 2, 14)));
    state.accum_sum.row(0) = rv({4, 0});
    state.accum_count[0] = 2;
    state.window_embeddings = {rv({0, 0}), rv({4, 0})};
    state.window_assignments = {0, 0};
    update_means(state, 7);
    CHECK(state.means(0, 0) == doctest::Approx(2.0));
    CHECK(state.means(0, 1) == doctest::Approx(0.0));
    CHECK(state.accum_count[0] == 0);
    CHECK(state.window_embeddings.empty());
    CHECK(state.epoch_of_last_update == 7);
}

TEST_CASE("empty clusters are re-seeded to the farthest accumulated point") {
    Mat<double> means(3, 2);
    means << 0, 0, 10, 0, 500, 500;  // cluster 2 will get nothing
    ClusterState<double> state = make_cluster_state(means);

    auto add = [&](RowVec<double> x, int c) {
        state.accum_sum.row(c) += x;
        state.accum_count[static_cast<std::size_t>(c)] += 1;
        state.window_embeddings.push_back(x);
        state.window_assignments.push_back(c);
    };
    add(rv({0, 1}), 0);
    add(rv({0, -1}), 0);
    add(rv({10, 1}), 1);
    add(rv({5, 50}), 0);  // outlier, far from every mean

    update_means(state, 3);
    CHECK(state.means.row(2) == rv({5, 50}));
}

TEST_CASE("update_means never increases WCSS under fixed assignments") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const int k = 4, d = 6, n = 40;
        ClusterState<double> state = make_cluster_state(Mat<double>(random_matrix(k, d, seed)));
        std::mt19937_64 rng(seed + 999);
        std::uniform_int_distribution<int> pick(0, k - 1);
        for (int i = 0; i < n; ++i) {
            RowVec<double> x = random_matrix(1, d, 5000 + seed * 100 + i).row(0);
            int c = pick(rng);
            state.accum_sum.row(c) += x;
            state.accum_count[static_cast<std::size_t>(c)] += 1;
            state.window_embeddings.push_back(x);
            state.window_assignments.push_back(c);
        }
        auto window = state.window_embeddings;
        auto assign = state.window_assignments;
        double before = wcss(window, assign, state.means);
        update_means(state, 1);
        double after = wcss(window, assign, state.means);
        CHECK(after <= before + 1e-9);
    }
}

TEST_CASE("combined_loss follows the schedule") {
    LossConfig config;
    config.temperature = 0.5;
    config.alpha = 1.0;
    config.clusters = 2;
    config.cluster_start_epoch = 50;

    Mat<double> batch = random_matrix(8, 4, 21);
    double nt_only = nt_xent(batch, 0.5).loss;

    ClusterState<double> state = make_cluster_state(Mat<double>(random_matrix(2, 4, 22)));

    SUBCASE("before the start epoch only the contrastive term applies") {
        CombinedLoss<double> out = combined_loss(batch, &state, config, 0);
        CHECK(out.total == doctest::Approx(nt_only).epsilon(1e-12));
        CHECK(out.clustering == 0.0);
        CHECK(state.window_embeddings.empty());  // no accumulation yet
    }

    SUBCASE("alpha 0 still accumulates assignments") {
        config.alpha = 0.0;
        CombinedLoss<double> out = combined_loss(batch, &state, config, 50);
        CHECK(out.total == doctest::Approx(nt_only).epsilon(1e-12));
        CHECK(out.clustering > 0.0);  // measured, just unweighted
        CHECK(state.window_embeddings.size() == 8);
        long total_count = 0;
        for (long c : state.accum_count) total_count += c;
        CHECK(total_count == 8);
    }

    SUBCASE("alpha 1 adds the terms") {
        CombinedLoss<double> out = combined_loss(batch, &state, config, 50);
        CHECK(out.total ==
              doctest::Approx(out.contrastive + config.alpha * out.clustering).epsilon(1e-12));
        CHECK(out.contrastive == doctest::Approx(nt_only).epsilon(1e-12));

        // the clustering term equals a hand evaluation on normalized rows
        Mat<double> unit = batch;
        for (int i = 0; i < 8; ++i) unit.row(i) /= unit.row(i).norm();
        std::vector<int> assignments;
        for (int p = 0; p < 4; ++p) {
            RowVec<double> a = unit.row(2 * p), b = unit.row(2 * p + 1);
            assignments.push_back(assign_pair<double>(a, b, state.means));
        }
        CHECK(out.clustering ==
              doctest::Approx(kmeans_loss(unit, assignments, state.means).loss).epsilon(1e-12));
    }
}

TEST_CASE("combined_loss gradients match finite differences with clustering on") {
    LossConfig config;
    config.alpha = 0.7;
    config.cluster_start_epoch = 0;
    config.clusters = 3;

    Mat<double> batch = random_matrix(6, 5, 31);
    ClusterState<double> state = make_cluster_state(Mat<double>(random_matrix(3, 5, 32)));

    ClusterState<double> scratch = state;
    CombinedLoss<double> out = combined_loss(batch, &scratch, config, 10);

    std::vector<Mat<double>*> params{&batch};
    std::vector<const Mat<double>*> analytic{&out.grads};
    double err = grad_check(
        params, analytic,
        [&] {
            ClusterState<double> tmp = state;  // keep accumulators untouched
            return combined_loss(batch, &tmp, config, 10).total;
        },
        1e-6, 30, 33);
    CHECK(err < 1e-5);
}

}  // TEST_SUITE
