#pragma once

#include <vector>

#include "walkfeat/mesh.hpp"

namespace walkfeat {

/// Target face budgets for augmentation, e.g. {1000, 2000, 4000}. `tolerance`
/// is the fractional deviation the caller accepts on the achieved count
/// (edge collapse removes faces two at a time, so exactness is pointless).
struct ResampleTargets {
    std::vector<int> face_counts = {1000, 2000, 4000};
    double tolerance = 0.02;
};

void validate_targets(const ResampleTargets& targets);

/// Iterative edge collapse ordered by quadric error. Stops once the face
/// count reaches `target_faces` (collapses that would flip a face normal,
/// duplicate a face, or break the edge link are rejected). Throws DataError
/// naming the best achievable count when the target cannot be reached.
/// Requires target_faces < |mesh.faces|.
Mesh simplify(const Mesh& mesh, int target_faces);

/// Midpoint 1->4 subdivision; shared edge midpoints are deduplicated, so the
/// output has exactly 4x the faces.
Mesh subdivide(const Mesh& mesh);

/// One output per target count: meshes below a target are subdivided until
/// they reach it, then collapsed down to the budget. All outputs keep the
/// input's source_id (and label).
std::vector<Mesh> resample_to(const Mesh& mesh, const ResampleTargets& targets);

}  // namespace walkfeat
