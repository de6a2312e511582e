#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "walkfeat/mesh.hpp"

namespace walkfeat {

/// A surface walk: visited vertex indices plus a per-step flag marking random
/// jumps (step 0 is always a jump, since the start vertex is drawn uniformly).
/// Every non-jump step moves along a mesh edge.
struct Walk {
    std::vector<int> vertex_indices;
    std::vector<bool> jump_flags;
};

/// L x 3 matrix of visited-vertex coordinates, the encoder's input sequence.
using StepSequence = Eigen::MatrixXd;

/// 2N sequences where rows 2i and 2i+1 were walked on (versions of) the same
/// source model. pair_ids[i] is that shared source id.
struct WalkBatch {
    std::vector<StepSequence> sequences;
    std::vector<std::string> pair_ids;
};

/// A mesh prepared for walking (normalized, with adjacency built).
struct WalkMesh {
    Mesh mesh;
    Adjacency adjacency;
};

/// All resampled versions of one model, without any label: the training path
/// cannot see class information by construction.
struct ModelGroup {
    std::string source_id;
    std::vector<WalkMesh> versions;
};

/// Walks `length` steps: start at a uniformly random vertex, then move to a
/// uniformly random unvisited neighbor, jumping to a uniformly random vertex
/// with probability `jump_prob` (forced when every neighbor was already
/// visited or the vertex is isolated).
Walk random_walk(const Mesh& mesh, const Adjacency& adj, int length, double jump_prob,
                 std::mt19937_64& rng);

StepSequence walk_to_sequence(const Mesh& mesh, const Walk& walk);

/// Samples `batch_size` distinct source ids (error if there are fewer), picks
/// an independently random resampled version for each of the two walks per
/// model, and emits 2N paired sequences. Each walk slot runs on its own RNG
/// stream derived from one draw of `rng`, so the batch content is identical
/// for any thread count.
WalkBatch make_batch(std::span<const ModelGroup> dataset, int batch_size, int walk_len,
                     double jump_prob, std::mt19937_64& rng, int threads = 1);

}  // namespace walkfeat
