#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "walkfeat/nn.hpp"

namespace walkfeat {

/// Loss hyperparameters and the clustering schedule.
struct LossConfig {
    double temperature = 0.5;       // tau
    double alpha = 1.0;             // clustering weight
    int clusters = 80;              // K
    int cluster_start_epoch = 50;   // contrastive-only before this epoch
    int means_update_period = 5;    // epochs between means updates
};

inline void validate_loss_config(const LossConfig& c) {
    if (c.temperature <= 0.0) throw ConfigError("temperature must be positive");
    if (c.alpha < 0.0) throw ConfigError("alpha must be non-negative");
    if (c.clusters < 2) throw ConfigError("cluster count must be at least 2");
    if (c.means_update_period < 1) throw ConfigError("means update period must be >= 1");
}

template <typename S>
struct LossValue {
    S loss = S(0);
    Mat<S> grads;  // same shape as the embedding batch
};

template <typename S>
S cosine_sim(const RowVec<S>& a, const RowVec<S>& b) {
    const S na = a.norm(), nb = b.norm();
    if (na == S(0) || nb == S(0)) throw NumericError("cosine similarity of a zero vector");
    return a.dot(b) / (na * nb);
}

/// Normalized temperature-scaled cross entropy over a paired batch
/// (rows 2i and 2i+1 are positives). Every row acts as an anchor once; the
/// softmax denominator runs over all other rows, self excluded. Gradients are
/// exact through the cosine normalization.
template <typename S>
LossValue<S> nt_xent(const Mat<S>& batch, S tau) {
    const int n = static_cast<int>(batch.rows());
    if (n < 2 || n % 2 != 0) throw DataError("nt_xent needs an even batch of at least 2 rows");
    if (tau <= S(0)) throw ConfigError("temperature must be positive");

    Eigen::Matrix<S, Eigen::Dynamic, 1> norms = batch.rowwise().norm();
    for (int i = 0; i < n; ++i)
        if (norms[i] == S(0)) throw NumericError("nt_xent: zero-norm embedding row");
    Mat<S> unit = batch.array().colwise() / norms.array();

    Mat<S> logits = (unit * unit.transpose()) / tau;

    LossValue<S> out;
    Mat<S> dlogits = Mat<S>::Zero(n, n);
    S total = S(0);
    for (int i = 0; i < n; ++i) {
        const int partner = i ^ 1;
        S row_max = -std::numeric_limits<S>::infinity();
        for (int j = 0; j < n; ++j)
            if (j != i) row_max = std::max(row_max, logits(i, j));
        S denom = S(0);
        for (int j = 0; j < n; ++j)
            if (j != i) denom += std::exp(logits(i, j) - row_max);
        total += -(logits(i, partner) - row_max) + std::log(denom);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            S softmax = std::exp(logits(i, j) - row_max) / denom;
            dlogits(i, j) = (softmax - (j == partner ? S(1) : S(0))) / S(n);
        }
    }
    out.loss = total / S(n);

    // logits = U U^T / tau with symmetric dependence on U.
    Mat<S> dunit = ((dlogits + dlogits.transpose()) * unit) / tau;
    out.grads.resize(n, batch.cols());
    for (int i = 0; i < n; ++i) {
        RowVec<S> u = unit.row(i);
        RowVec<S> g = dunit.row(i);
        out.grads.row(i) = (g - g.dot(u) * u) / norms[i];
    }
    return out;
}

/// k-means++ seeding: first mean uniform over the sample, each next one drawn
/// with probability proportional to the squared distance to the nearest mean
/// already chosen.
template <typename S>
Mat<S> kmeans_init(const Mat<S>& sample, int k, std::mt19937_64& rng) {
    const int n = static_cast<int>(sample.rows());
    if (k < 1) throw ConfigError("cluster count must be positive");
    if (n < k)
        throw DataError("kmeans_init: sample of " + std::to_string(n) +
                        " is smaller than K=" + std::to_string(k));

    Mat<S> means(k, sample.cols());
    std::uniform_int_distribution<int> uniform_point(0, n - 1);
    means.row(0) = sample.row(uniform_point(rng));

    std::vector<double> dist2(n);
    for (int chosen = 1; chosen < k; ++chosen) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < chosen; ++c) {
                double d = (sample.row(i) - means.row(c)).squaredNorm();
                best = std::min(best, d);
            }
            dist2[i] = best;
            total += best;
        }
        int pick;
        if (total <= 0.0) {
            pick = uniform_point(rng);  // all remaining points coincide with a mean
        } else {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            pick = n - 1;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += dist2[i];
                if (r <= acc) {
                    pick = i;
                    break;
                }
            }
        }
        means.row(chosen) = sample.row(pick);
    }
    return means;
}

/// Both features of a positive pair go to one cluster: the mean closest to
/// either of them. Ties resolve to the lowest cluster index.
template <typename S>
int assign_pair(const RowVec<S>& x1, const RowVec<S>& x2, const Mat<S>& means) {
    if (means.rows() == 0) throw DataError("assign_pair: no means");
    int best = 0;
    S best_d = std::numeric_limits<S>::max();
    for (int c = 0; c < means.rows(); ++c) {
        S d = std::min((x1 - means.row(c)).squaredNorm(), (x2 - means.row(c)).squaredNorm());
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

/// Within-cluster sum of squares over the batch, averaged over rows. Means are
/// constants here: gradients flow to the embeddings only.
template <typename S>
LossValue<S> kmeans_loss(const Mat<S>& batch, const std::vector<int>& assignments,
                         const Mat<S>& means) {
    const int n = static_cast<int>(batch.rows());
    if (n % 2 != 0 || static_cast<int>(assignments.size()) != n / 2)
        throw DataError("kmeans_loss: one assignment per positive pair required");
    LossValue<S> out;
    out.grads = Mat<S>::Zero(n, batch.cols());
    for (int i = 0; i < n; ++i) {
        int cluster = assignments[static_cast<std::size_t>(i / 2)];
        if (cluster < 0 || cluster >= means.rows())
            throw DataError("kmeans_loss: assignment index out of range");
        RowVec<S> diff = batch.row(i) - means.row(cluster);
        out.loss += diff.squaredNorm();
        out.grads.row(i) = S(2) * diff;
    }
    out.loss /= S(n);
    out.grads /= S(n);
    return out;
}

/// K mean vectors plus the assignment accumulators gathered since the last
/// update. The window keeps the accumulated embeddings so empty clusters can
/// be re-seeded to the farthest point.
template <typename S>
struct ClusterState {
    Mat<S> means;      // K x D
    Mat<S> accum_sum;  // K x D
    std::vector<long> accum_count;
    int epoch_of_last_update = -1;
    std::vector<RowVec<S>> window_embeddings;
    std::vector<int> window_assignments;

    bool initialized() const { return means.rows() > 0; }
    void reset_accumulators() {
        accum_sum.setZero();
        std::fill(accum_count.begin(), accum_count.end(), 0L);
        window_embeddings.clear();
        window_assignments.clear();
    }
};

template <typename S>
ClusterState<S> make_cluster_state(Mat<S> means) {
    ClusterState<S> state;
    state.accum_sum = Mat<S>::Zero(means.rows(), means.cols());
    state.accum_count.assign(static_cast<std::size_t>(means.rows()), 0L);
    state.means = std::move(means);
    return state;
}

/// Plain WCSS of `rows` against `means` under fixed per-row assignments
/// (used by the update_means non-increase property).
template <typename S>
double wcss(const std::vector<RowVec<S>>& rows, const std::vector<int>& assignments,
            const Mat<S>& means) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        total += static_cast<double>((rows[i] - means.row(assignments[i])).squaredNorm());
    return total;
}

/// Scheduled means refresh: every cluster with assignments moves to the mean
/// of its accumulated vectors; clusters that attracted nothing are re-seeded
/// to the accumulated embedding farthest from its nearest (updated) mean.
/// Accumulators and the window reset afterwards.
template <typename S>
void update_means(ClusterState<S>& state, int epoch) {
    const int k = static_cast<int>(state.means.rows());
    std::vector<int> empty;
    for (int c = 0; c < k; ++c) {
        if (state.accum_count[c] > 0)
            state.means.row(c) = state.accum_sum.row(c) / static_cast<S>(state.accum_count[c]);
        else
            empty.push_back(c);
    }

    if (!state.window_embeddings.empty()) {
        std::vector<bool> used(state.window_embeddings.size(), false);
        for (int c : empty) {
            int farthest = -1;
            S far_d = S(-1);
            for (std::size_t i = 0; i < state.window_embeddings.size(); ++i) {
                if (used[i]) continue;
                S nearest = std::numeric_limits<S>::max();
                for (int m = 0; m < k; ++m)
                    nearest = std::min(nearest,
                                       (state.window_embeddings[i] - state.means.row(m)).squaredNorm());
                if (nearest > far_d) {
                    far_d = nearest;
                    farthest = static_cast<int>(i);
                }
            }
            if (farthest >= 0) {
                state.means.row(c) = state.window_embeddings[static_cast<std::size_t>(farthest)];
                used[static_cast<std::size_t>(farthest)] = true;
            }
        }
    }

    state.reset_accumulators();
    state.epoch_of_last_update = epoch;
}

template <typename S>
struct CombinedLoss {
    S total = S(0);
    S contrastive = S(0);
    S clustering = S(0);
    Mat<S> grads;
};

/// NT-Xent before the clustering schedule kicks in; afterwards the clustering
/// term is added on L2-normalized embeddings, with fresh pair assignments
/// against the current means and detached accumulation into the state.
template <typename S>
CombinedLoss<S> combined_loss(const Mat<S>& projected, ClusterState<S>* state,
                              const LossConfig& config, int epoch) {
    CombinedLoss<S> out;
    LossValue<S> nt = nt_xent(projected, static_cast<S>(config.temperature));
    out.contrastive = nt.loss;
    out.grads = std::move(nt.grads);
    out.total = nt.loss;

    const bool cluster_active =
        epoch >= config.cluster_start_epoch && state != nullptr && state->initialized();
    if (!cluster_active) return out;

    const int n = static_cast<int>(projected.rows());
    Eigen::Matrix<S, Eigen::Dynamic, 1> norms = projected.rowwise().norm();
    Mat<S> unit = projected.array().colwise() / norms.array();

    std::vector<int> assignments(static_cast<std::size_t>(n / 2));
    for (int p = 0; p < n / 2; ++p) {
        RowVec<S> a = unit.row(2 * p), b = unit.row(2 * p + 1);
        assignments[static_cast<std::size_t>(p)] = assign_pair<S>(a, b, state->means);
    }

    LossValue<S> km = kmeans_loss(unit, assignments, state->means);
    out.clustering = km.loss;
    out.total += static_cast<S>(config.alpha) * km.loss;

    // Chain through the row normalization, then add the weighted term.
    for (int i = 0; i < n; ++i) {
        RowVec<S> u = unit.row(i);
        RowVec<S> g = km.grads.row(i);
        out.grads.row(i) += static_cast<S>(config.alpha) * (g - g.dot(u) * u) / norms[i];
    }

    // Accumulate detached normalized embeddings for the next means update.
    for (int p = 0; p < n / 2; ++p) {
        int c = assignments[static_cast<std::size_t>(p)];
        state->accum_sum.row(c) += unit.row(2 * p) + unit.row(2 * p + 1);
        state->accum_count[static_cast<std::size_t>(c)] += 2;
        state->window_embeddings.emplace_back(unit.row(2 * p));
        state->window_embeddings.emplace_back(unit.row(2 * p + 1));
        state->window_assignments.push_back(c);
        state->window_assignments.push_back(c);
    }
    return out;
}

}  // namespace walkfeat
