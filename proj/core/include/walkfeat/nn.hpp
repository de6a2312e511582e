#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "walkfeat/errors.hpp"
#include "walkfeat/walker.hpp"

namespace walkfeat {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

/// Network widths. The walk encoder embeds each 3-d step through two dense
/// layers, runs three stacked gated recurrent layers over the sequence, and
/// maps the final hidden state through one dense layer; the projection head
/// compresses features for the losses only.
struct NetSizes {
    int fc1 = 128;
    int fc2 = 256;
    std::array<int, 3> gru = {256, 256, 2048};
    int feature_dim = 2048;
    int proj_hidden = 512;
    int proj_dim = 256;

    static NetSizes paper() { return NetSizes{}; }

    // Small enough that finite-difference suites and end-to-end tests run in
    // seconds on a CPU.
    static NetSizes desk() {
        NetSizes s;
        s.fc1 = 32;
        s.fc2 = 64;
        s.gru = {64, 64, 128};
        s.feature_dim = 128;
        s.proj_hidden = 64;
        s.proj_dim = 32;
        return s;
    }
};

inline NetSizes net_sizes_from_preset(const std::string& preset) {
    if (preset == "paper") return NetSizes::paper();
    if (preset == "desk") return NetSizes::desk();
    throw ConfigError("unknown network preset: " + preset);
}

// --- parameter containers ---------------------------------------------------

template <typename S>
struct DenseParams {
    Mat<S> W;  // out x in
    Mat<S> b;  // 1 x out
};

template <typename S>
struct GruParams {
    Mat<S> Wz, Uz, bz;  // update gate
    Mat<S> Wr, Ur, br;  // reset gate
    Mat<S> Wh, Uh, bh;  // candidate state
};

template <typename S>
struct EncoderParams {
    NetSizes sizes;
    DenseParams<S> fc1, fc2;
    std::array<GruParams<S>, 3> gru;
    DenseParams<S> fc_out;
};

template <typename S>
struct ProjectionParams {
    DenseParams<S> l1, l2;
};

// Uniform visitation in a fixed order; the optimizer, checkpointing, and the
// gradient checker all rely on it.
template <typename P, typename F>
void visit_dense(P& p, const std::string& prefix, F&& f) {
    f(prefix + ".W", p.W);
    f(prefix + ".b", p.b);
}

template <typename P, typename F>
void visit_gru(P& p, const std::string& prefix, F&& f) {
    f(prefix + ".Wz", p.Wz);
    f(prefix + ".Uz", p.Uz);
    f(prefix + ".bz", p.bz);
    f(prefix + ".Wr", p.Wr);
    f(prefix + ".Ur", p.Ur);
    f(prefix + ".br", p.br);
    f(prefix + ".Wh", p.Wh);
    f(prefix + ".Uh", p.Uh);
    f(prefix + ".bh", p.bh);
}

template <typename P, typename F>
void visit_encoder(P& p, F&& f) {
    visit_dense(p.fc1, "fc1", f);
    visit_dense(p.fc2, "fc2", f);
    for (int l = 0; l < 3; ++l) visit_gru(p.gru[l], "gru" + std::to_string(l), f);
    visit_dense(p.fc_out, "fc_out", f);
}

template <typename P, typename F>
void visit_projection(P& p, F&& f) {
    visit_dense(p.l1, "proj1", f);
    visit_dense(p.l2, "proj2", f);
}

// --- initialization -----------------------------------------------------------

namespace detail {

template <typename S>
Mat<S> uniform_init(int rows, int cols, int fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat<S> m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = static_cast<S>(dist(rng));
    return m;
}

template <typename S>
void ensure_finite(const Mat<S>& m, const char* where) {
    if (!m.allFinite()) throw NumericError(std::string("non-finite activation in ") + where);
}

}  // namespace detail

template <typename S>
DenseParams<S> make_dense(int in, int out, std::mt19937_64& rng) {
    return {detail::uniform_init<S>(out, in, in, rng), Mat<S>::Zero(1, out)};
}

template <typename S>
GruParams<S> make_gru(int in, int out, std::mt19937_64& rng) {
    GruParams<S> g;
    g.Wz = detail::uniform_init<S>(out, in, in, rng);
    g.Uz = detail::uniform_init<S>(out, out, out, rng);
    g.bz = Mat<S>::Zero(1, out);
    g.Wr = detail::uniform_init<S>(out, in, in, rng);
    g.Ur = detail::uniform_init<S>(out, out, out, rng);
    g.br = Mat<S>::Zero(1, out);
    g.Wh = detail::uniform_init<S>(out, in, in, rng);
    g.Uh = detail::uniform_init<S>(out, out, out, rng);
    g.bh = Mat<S>::Zero(1, out);
    return g;
}

template <typename S>
EncoderParams<S> make_encoder(const NetSizes& sizes, std::mt19937_64& rng) {
    EncoderParams<S> p;
    p.sizes = sizes;
    p.fc1 = make_dense<S>(3, sizes.fc1, rng);
    p.fc2 = make_dense<S>(sizes.fc1, sizes.fc2, rng);
    int in = sizes.fc2;
    for (int l = 0; l < 3; ++l) {
        p.gru[l] = make_gru<S>(in, sizes.gru[l], rng);
        in = sizes.gru[l];
    }
    p.fc_out = make_dense<S>(sizes.gru[2], sizes.feature_dim, rng);
    return p;
}

template <typename S>
ProjectionParams<S> make_projection(const NetSizes& sizes, std::mt19937_64& rng) {
    ProjectionParams<S> p;
    p.l1 = make_dense<S>(sizes.feature_dim, sizes.proj_hidden, rng);
    p.l2 = make_dense<S>(sizes.proj_hidden, sizes.proj_dim, rng);
    return p;
}

template <typename S>
EncoderParams<S> zeros_like(const EncoderParams<S>& p) {
    EncoderParams<S> z = p;
    visit_encoder(z, [](const std::string&, Mat<S>& m) { m.setZero(); });
    return z;
}

template <typename S>
ProjectionParams<S> zeros_like(const ProjectionParams<S>& p) {
    ProjectionParams<S> z = p;
    visit_projection(z, [](const std::string&, Mat<S>& m) { m.setZero(); });
    return z;
}

// --- forward / backward -------------------------------------------------------

/// Everything the backward pass needs, recorded step by step.
template <typename S>
struct EncoderCache {
    std::vector<Mat<S>> input;               // L of B x 3
    std::vector<Mat<S>> fc1_post, fc2_post;  // post-ReLU step embeddings
    struct GruSeq {
        std::vector<Mat<S>> z, r, hc, h;  // gates, candidate, hidden per step
    };
    std::array<GruSeq, 3> gru;
    Mat<S> last_hidden;  // input of fc_out
    Mat<S> features;     // B x feature_dim
    int steps = 0;
    int batch = 0;
};

template <typename S>
Mat<S> dense_forward(const DenseParams<S>& d, const Mat<S>& x) {
    return (x * d.W.transpose()).rowwise() + d.b.row(0);
}

/// Linear-layer reverse mode: accumulates dW = dy^T x and db, returns dx.
template <typename S>
Mat<S> dense_backward(const DenseParams<S>& d, const Mat<S>& x, const Mat<S>& dy,
                      DenseParams<S>& grads) {
    grads.W.noalias() += dy.transpose() * x;
    grads.b.noalias() += dy.colwise().sum();
    return dy * d.W;
}

namespace detail {

// One recurrent step. h_prev may be empty at t = 0 (treated as zeros).
template <typename S>
void gru_step(const GruParams<S>& g, const Mat<S>& x, const Mat<S>& h_prev, Mat<S>& z, Mat<S>& r,
              Mat<S>& hc, Mat<S>& h) {
    auto sigmoid = [](S v) { return S(1) / (S(1) + std::exp(-v)); };
    Mat<S> az = (x * g.Wz.transpose()).rowwise() + g.bz.row(0);
    Mat<S> ar = (x * g.Wr.transpose()).rowwise() + g.br.row(0);
    if (h_prev.size() > 0) {
        az.noalias() += h_prev * g.Uz.transpose();
        ar.noalias() += h_prev * g.Ur.transpose();
    }
    z = az.unaryExpr(sigmoid);
    r = ar.unaryExpr(sigmoid);
    Mat<S> ah = (x * g.Wh.transpose()).rowwise() + g.bh.row(0);
    if (h_prev.size() > 0) ah.noalias() += (r.cwiseProduct(h_prev)) * g.Uh.transpose();
    hc = ah.array().tanh();
    if (h_prev.size() > 0)
        h = z.cwiseProduct(h_prev) + (Mat<S>::Ones(z.rows(), z.cols()) - z).cwiseProduct(hc);
    else
        h = (Mat<S>::Ones(z.rows(), z.cols()) - z).cwiseProduct(hc);
}

}  // namespace detail

/// Runs the full walk encoder over a batch of equal-length sequences.
/// Returns B x feature_dim; fills `cache` when given (training path).
template <typename S>
Mat<S> encoder_forward(const EncoderParams<S>& params, const std::vector<StepSequence>& seqs,
                       EncoderCache<S>* cache = nullptr) {
    if (seqs.empty()) throw DataError("encoder_forward: empty batch");
    const int batch = static_cast<int>(seqs.size());
    const int steps = static_cast<int>(seqs.front().rows());
    for (const auto& s : seqs) {
        if (s.rows() != steps || s.cols() != 3)
            throw DataError("encoder_forward: sequences must all be L x 3");
    }

    if (cache) {
        *cache = EncoderCache<S>{};
        cache->steps = steps;
        cache->batch = batch;
        cache->input.resize(steps);
        cache->fc1_post.resize(steps);
        cache->fc2_post.resize(steps);
        for (auto& g : cache->gru) {
            g.z.resize(steps);
            g.r.resize(steps);
            g.hc.resize(steps);
            g.h.resize(steps);
        }
    }

    std::array<Mat<S>, 3> hidden;  // running hidden state per layer
    Mat<S> z, r, hc, h;
    for (int t = 0; t < steps; ++t) {
        Mat<S> x(batch, 3);
        for (int b = 0; b < batch; ++b) x.row(b) = seqs[b].row(t).template cast<S>();
        if (cache) cache->input[t] = x;

        Mat<S> a1 = dense_forward(params.fc1, x).cwiseMax(S(0));
        Mat<S> a2 = dense_forward(params.fc2, a1).cwiseMax(S(0));
        detail::ensure_finite(a2, "fc_in");
        if (cache) {
            cache->fc1_post[t] = a1;
            cache->fc2_post[t] = a2;
        }

        Mat<S>* layer_in = &a2;
        for (int l = 0; l < 3; ++l) {
            detail::gru_step(params.gru[l], *layer_in, hidden[l], z, r, hc, h);
            if (!h.allFinite())
                throw NumericError("non-finite activation in gru" + std::to_string(l) + " at step " +
                                   std::to_string(t));
            hidden[l] = h;
            if (cache) {
                cache->gru[l].z[t] = z;
                cache->gru[l].r[t] = r;
                cache->gru[l].hc[t] = hc;
                cache->gru[l].h[t] = h;
            }
            layer_in = &hidden[l];
        }
    }

    Mat<S> features = dense_forward(params.fc_out, hidden[2]);
    detail::ensure_finite(features, "fc_out");
    if (cache) {
        cache->last_hidden = hidden[2];
        cache->features = features;
    }
    return features;
}

template <typename S>
Mat<S> projection_forward(const ProjectionParams<S>& params, const Mat<S>& features,
                          Mat<S>* hidden_cache = nullptr) {
    if (features.cols() != params.l1.W.cols())
        throw DataError("projection_forward: feature dimension mismatch");
    Mat<S> h = dense_forward(params.l1, features).cwiseMax(S(0));
    detail::ensure_finite(h, "projection");
    if (hidden_cache) *hidden_cache = h;
    return dense_forward(params.l2, h);
}

namespace detail {

// BPTT through one recurrent layer step. Accumulates parameter gradients and
// returns gradients for the step input and the previous hidden state.
template <typename S>
void gru_step_backward(const GruParams<S>& g, const Mat<S>& x, const Mat<S>& h_prev,
                       const Mat<S>& z, const Mat<S>& r, const Mat<S>& hc, const Mat<S>& dh,
                       GruParams<S>& grads, Mat<S>& dx, Mat<S>& dh_prev) {
    const bool has_prev = h_prev.size() > 0;
    Mat<S> ones = Mat<S>::Ones(z.rows(), z.cols());

    Mat<S> dhc = dh.cwiseProduct(ones - z);
    Mat<S> dz = has_prev ? Mat<S>(dh.cwiseProduct(h_prev - hc)) : Mat<S>(-dh.cwiseProduct(hc));
    dh_prev = has_prev ? Mat<S>(dh.cwiseProduct(z)) : Mat<S>();

    // candidate: hc = tanh(x Wh^T + (r o h_prev) Uh^T + bh)
    Mat<S> da_h = dhc.cwiseProduct(ones - hc.cwiseProduct(hc));
    grads.Wh.noalias() += da_h.transpose() * x;
    grads.bh.noalias() += da_h.colwise().sum();
    dx = da_h * g.Wh;
    Mat<S> dr;
    if (has_prev) {
        Mat<S> rh = r.cwiseProduct(h_prev);
        grads.Uh.noalias() += da_h.transpose() * rh;
        Mat<S> drh = da_h * g.Uh;
        dr = drh.cwiseProduct(h_prev);
        dh_prev.noalias() += drh.cwiseProduct(r);
    }

    // update gate: z = sigmoid(x Wz^T + h_prev Uz^T + bz)
    Mat<S> da_z = dz.cwiseProduct(z.cwiseProduct(ones - z));
    grads.Wz.noalias() += da_z.transpose() * x;
    grads.bz.noalias() += da_z.colwise().sum();
    dx.noalias() += da_z * g.Wz;
    if (has_prev) {
        grads.Uz.noalias() += da_z.transpose() * h_prev;
        dh_prev.noalias() += da_z * g.Uz;
    }

    // reset gate: only reachable through the candidate, so no h_prev means no
    // gradient at all.
    if (has_prev) {
        Mat<S> da_r = dr.cwiseProduct(r.cwiseProduct(ones - r));
        grads.Wr.noalias() += da_r.transpose() * x;
        grads.br.noalias() += da_r.colwise().sum();
        grads.Ur.noalias() += da_r.transpose() * h_prev;
        dx.noalias() += da_r * g.Wr;
        dh_prev.noalias() += da_r * g.Ur;
    }
}

}  // namespace detail

/// Reverse-mode gradients for the whole encoder. `dfeatures` is dLoss/dOutput
/// (B x feature_dim). Parameter gradients are accumulated into `grads`; pass
/// `dinput` to also get gradients w.r.t. the walk coordinates.
template <typename S>
void encoder_backward(const EncoderParams<S>& params, const EncoderCache<S>& cache,
                      const Mat<S>& dfeatures, EncoderParams<S>& grads,
                      std::vector<Mat<S>>* dinput = nullptr) {
    if (cache.steps == 0) throw DataError("encoder_backward: missing forward cache");
    const int steps = cache.steps;

    // fc_out
    grads.fc_out.W.noalias() += dfeatures.transpose() * cache.last_hidden;
    grads.fc_out.b.noalias() += dfeatures.colwise().sum();
    Mat<S> carry2 = dfeatures * params.fc_out.W;  // into h2[L-1]
    Mat<S> carry1, carry0;                        // into h1[t], h0[t] from the future

    if (dinput) dinput->assign(steps, Mat<S>());

    Mat<S> dx2, dx1, dx0, dh_prev;
    for (int t = steps - 1; t >= 0; --t) {
        const Mat<S> empty;
        const Mat<S>& h2p = t > 0 ? cache.gru[2].h[t - 1] : empty;
        const Mat<S>& h1p = t > 0 ? cache.gru[1].h[t - 1] : empty;
        const Mat<S>& h0p = t > 0 ? cache.gru[0].h[t - 1] : empty;

        detail::gru_step_backward(params.gru[2], cache.gru[1].h[t], h2p, cache.gru[2].z[t],
                                  cache.gru[2].r[t], cache.gru[2].hc[t], carry2, grads.gru[2], dx2,
                                  dh_prev);
        carry2 = dh_prev;

        Mat<S> g1 = carry1.size() > 0 ? Mat<S>(carry1 + dx2) : dx2;
        detail::gru_step_backward(params.gru[1], cache.gru[0].h[t], h1p, cache.gru[1].z[t],
                                  cache.gru[1].r[t], cache.gru[1].hc[t], g1, grads.gru[1], dx1,
                                  dh_prev);
        carry1 = dh_prev;

        Mat<S> g0 = carry0.size() > 0 ? Mat<S>(carry0 + dx1) : dx1;
        detail::gru_step_backward(params.gru[0], cache.fc2_post[t], h0p, cache.gru[0].z[t],
                                  cache.gru[0].r[t], cache.gru[0].hc[t], g0, grads.gru[0], dx0,
                                  dh_prev);
        carry0 = dh_prev;

        // step embedding: two dense+ReLU layers
        Mat<S> dpre2 =
            dx0.cwiseProduct((cache.fc2_post[t].array() > S(0)).template cast<S>().matrix());
        grads.fc2.W.noalias() += dpre2.transpose() * cache.fc1_post[t];
        grads.fc2.b.noalias() += dpre2.colwise().sum();
        Mat<S> da1 = dpre2 * params.fc2.W;
        Mat<S> dpre1 =
            da1.cwiseProduct((cache.fc1_post[t].array() > S(0)).template cast<S>().matrix());
        grads.fc1.W.noalias() += dpre1.transpose() * cache.input[t];
        grads.fc1.b.noalias() += dpre1.colwise().sum();
        if (dinput) (*dinput)[t] = dpre1 * params.fc1.W;
    }
}

/// Backward through the projection head. Returns dLoss/dFeatures and
/// accumulates parameter gradients.
template <typename S>
Mat<S> projection_backward(const ProjectionParams<S>& params, const Mat<S>& features,
                           const Mat<S>& hidden, const Mat<S>& dout, ProjectionParams<S>& grads) {
    grads.l2.W.noalias() += dout.transpose() * hidden;
    grads.l2.b.noalias() += dout.colwise().sum();
    Mat<S> dh = dout * params.l2.W;
    Mat<S> dpre = dh.cwiseProduct((hidden.array() > S(0)).template cast<S>().matrix());
    grads.l1.W.noalias() += dpre.transpose() * features;
    grads.l1.b.noalias() += dpre.colwise().sum();
    return dpre * params.l1.W;
}

// --- optimizer -----------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment accumulators in parameter-visitation order.
template <typename S>
struct AdamState {
    AdamConfig config;
    std::vector<Mat<S>> m, v;
    long step = 0;
};

template <typename S>
AdamState<S> make_adam(const std::vector<Mat<S>*>& params, const AdamConfig& config) {
    AdamState<S> state;
    state.config = config;
    for (const Mat<S>* p : params) {
        state.m.push_back(Mat<S>::Zero(p->rows(), p->cols()));
        state.v.push_back(Mat<S>::Zero(p->rows(), p->cols()));
    }
    return state;
}

/// Standard bias-corrected adaptive-moment update, in place.
template <typename S>
void adam_step(const std::vector<Mat<S>*>& params, const std::vector<const Mat<S>*>& grads,
               AdamState<S>& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw DataError("adam_step: parameter/gradient/state arity mismatch");
    ++state.step;
    const S b1 = static_cast<S>(state.config.beta1);
    const S b2 = static_cast<S>(state.config.beta2);
    const S lr = static_cast<S>(state.config.lr);
    const S eps = static_cast<S>(state.config.eps);
    const S corr1 = S(1) - static_cast<S>(std::pow(state.config.beta1, state.step));
    const S corr2 = S(1) - static_cast<S>(std::pow(state.config.beta2, state.step));

    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols())
            throw DataError("adam_step: gradient shape mismatch at tensor " + std::to_string(i));
        auto& m = state.m[i];
        auto& v = state.v[i];
        m = b1 * m + (S(1) - b1) * (*grads[i]);
        v = b2 * v + (S(1) - b2) * grads[i]->cwiseProduct(*grads[i]);
        params[i]->array() -=
            lr * ((m / corr1).array() / ((v / corr2).array().sqrt() + eps));
    }
}

template <typename S>
std::vector<Mat<S>*> collect_tensors(EncoderParams<S>& enc, ProjectionParams<S>& proj) {
    std::vector<Mat<S>*> out;
    visit_encoder(enc, [&](const std::string&, Mat<S>& m) { out.push_back(&m); });
    visit_projection(proj, [&](const std::string&, Mat<S>& m) { out.push_back(&m); });
    return out;
}

template <typename S>
std::vector<const Mat<S>*> collect_tensors(const EncoderParams<S>& enc,
                                           const ProjectionParams<S>& proj) {
    std::vector<const Mat<S>*> out;
    visit_encoder(enc, [&](const std::string&, const Mat<S>& m) { out.push_back(&m); });
    visit_projection(proj, [&](const std::string&, const Mat<S>& m) { out.push_back(&m); });
    return out;
}

// --- gradient checking -----------------------------------------------------------

/// Compares analytic gradients against central finite differences on a random
/// subset of coordinates (at least `min_coords` when available). `loss` must
/// re-evaluate the objective at the current parameter values. Near-zero
/// pairs are compared absolutely; everything else relatively.
template <typename S, typename LossFn>
double grad_check(const std::vector<Mat<S>*>& params, const std::vector<const Mat<S>*>& analytic,
                  LossFn&& loss, double epsilon, int min_coords, std::uint64_t seed) {
    static_assert(std::is_same_v<S, double>,
                  "finite differences are only trustworthy at 64-bit precision");
    long total = 0;
    for (const Mat<S>* p : params) total += p->size();
    const long want = std::min<long>(total, std::max(min_coords, 1));

    std::mt19937_64 rng(seed);
    std::vector<long> coords;
    if (want >= total) {
        coords.resize(total);
        for (long i = 0; i < total; ++i) coords[i] = i;
    } else {
        std::vector<long> all(total);
        for (long i = 0; i < total; ++i) all[i] = i;
        for (long i = 0; i < want; ++i) {
            std::uniform_int_distribution<long> pick(i, total - 1);
            std::swap(all[i], all[pick(rng)]);
        }
        coords.assign(all.begin(), all.begin() + want);
    }

    double worst = 0.0;
    for (long flat : coords) {
        long offset = flat;
        std::size_t ti = 0;
        while (offset >= params[ti]->size()) {
            offset -= params[ti]->size();
            ++ti;
        }
        S* slot = params[ti]->data() + offset;
        const S saved = *slot;

        *slot = saved + static_cast<S>(epsilon);
        const double up = static_cast<double>(loss());
        *slot = saved - static_cast<S>(epsilon);
        const double down = static_cast<double>(loss());
        *slot = saved;

        const double numeric = (up - down) / (2.0 * epsilon);
        const double exact = static_cast<double>(analytic[ti]->data()[offset]);
        const double denom = std::max(std::abs(numeric), std::abs(exact));
        const double err = denom < 1e-7 ? std::abs(numeric - exact)
                                        : std::abs(numeric - exact) / denom;
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace walkfeat
