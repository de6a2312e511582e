#include "walkfeat/walker.hpp"

#include <algorithm>
#include <numeric>

#include "walkfeat/parallel.hpp"
#include "walkfeat/rng.hpp"

namespace walkfeat {

Walk random_walk(const Mesh& mesh, const Adjacency& adj, int length, double jump_prob,
                 std::mt19937_64& rng) {
    if (length < 2) throw DataError("walk length must be at least 2");
    if (jump_prob < 0.0 || jump_prob > 1.0) throw ConfigError("jump_prob must be in [0, 1]");
    const int nv = static_cast<int>(mesh.vertices.size());
    if (adj.neighbors.size() != static_cast<std::size_t>(nv))
        throw DataError("adjacency does not match mesh");

    Walk walk;
    walk.vertex_indices.reserve(length);
    walk.jump_flags.reserve(length);

    std::uniform_int_distribution<int> any_vertex(0, nv - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<bool> visited(nv, false);
    std::vector<int> fresh;

    int current = any_vertex(rng);
    visited[current] = true;
    walk.vertex_indices.push_back(current);
    walk.jump_flags.push_back(true);

    for (int step = 1; step < length; ++step) {
        const auto& nbrs = adj.neighbors[current];
        fresh.clear();
        for (int n : nbrs)
            if (!visited[n]) fresh.push_back(n);

        bool jump = fresh.empty() && nbrs.empty();  // isolated vertex: only jumps remain
        if (!jump) {
            bool exhausted = fresh.empty();
            jump = exhausted || coin(rng) < jump_prob;
        }

        int next;
        if (jump) {
            next = any_vertex(rng);
        } else if (!fresh.empty()) {
            next = fresh[std::uniform_int_distribution<int>(0, static_cast<int>(fresh.size()) - 1)(rng)];
        } else {
            // Unreachable given the forced-jump rule; kept so a bookkeeping
            // bug degrades to a legal edge move instead of UB.
            next = nbrs[std::uniform_int_distribution<int>(0, static_cast<int>(nbrs.size()) - 1)(rng)];
        }
        visited[next] = true;
        walk.vertex_indices.push_back(next);
        walk.jump_flags.push_back(jump);
        current = next;
    }
    return walk;
}

StepSequence walk_to_sequence(const Mesh& mesh, const Walk& walk) {
    const int len = static_cast<int>(walk.vertex_indices.size());
    if (len == 0 || walk.jump_flags.size() != walk.vertex_indices.size())
        throw DataError("walk is empty or inconsistent");
    StepSequence seq(len, 3);
    for (int t = 0; t < len; ++t) {
        int v = walk.vertex_indices[t];
        if (v < 0 || v >= static_cast<int>(mesh.vertices.size()))
            throw DataError("walk vertex index " + std::to_string(v) + " out of range");
        seq.row(t) = mesh.vertices[v].transpose();
    }
    return seq;
}

WalkBatch make_batch(std::span<const ModelGroup> dataset, int batch_size, int walk_len,
                     double jump_prob, std::mt19937_64& rng, int threads) {
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (static_cast<int>(dataset.size()) < batch_size)
        throw DataError("batch of " + std::to_string(batch_size) + " models requested but only " +
                        std::to_string(dataset.size()) + " distinct source ids available");

    const std::uint64_t batch_seed = rng();

    // Partial Fisher-Yates: the first batch_size entries of `order` are a
    // uniform sample without replacement.
    auto select_rng = make_rng(derive_seed(batch_seed, "select"));
    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < batch_size; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(order.size()) - 1);
        std::swap(order[i], order[pick(select_rng)]);
    }

    WalkBatch batch;
    batch.sequences.resize(2 * static_cast<std::size_t>(batch_size));
    batch.pair_ids.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        const ModelGroup& group = dataset[order[i]];
        if (group.versions.empty())
            throw DataError("model " + group.source_id + " has no mesh versions");
        batch.pair_ids.push_back(group.source_id);
    }

    parallel_for(2 * batch_size, threads, [&](int slot) {
        const ModelGroup& group = dataset[order[slot / 2]];
        auto wrng = make_rng(derive_seed(batch_seed, "walk", slot));
        std::uniform_int_distribution<int> pick_version(
            0, static_cast<int>(group.versions.size()) - 1);
        const WalkMesh& wm = group.versions[pick_version(wrng)];
        Walk walk = random_walk(wm.mesh, wm.adjacency, walk_len, jump_prob, wrng);
        batch.sequences[slot] = walk_to_sequence(wm.mesh, walk);
    });
    return batch;
}

}  // namespace walkfeat
