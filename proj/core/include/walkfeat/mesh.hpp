#pragma once

#include <Eigen/Dense>
#include <array>
#include <cctype>
#include <string>
#include <vector>

#include "walkfeat/errors.hpp"

namespace walkfeat {

using Vec3 = Eigen::Vector3d;

enum class MeshFormat { OFF, OBJ };

/// A triangular mesh: vertex positions plus triangle faces. `source_id` is
/// shared by all resampled versions of one original model and is what pairs
/// walks downstream; `label` is an optional class tag that only evaluation
/// code may read.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::string source_id;
    std::string label;  // empty = unlabeled
};

/// Per-vertex sorted neighbor lists derived from face edges.
struct Adjacency {
    std::vector<std::vector<int>> neighbors;
};

/// Checks the Mesh invariants (index bounds, non-degenerate faces,
/// |faces| >= 1, |vertices| >= 3). Throws DataError on violation.
void validate_mesh(const Mesh& mesh);

/// Parses OFF or OBJ text. Polygon faces are fan-triangulated from their
/// first vertex; vertex order is preserved. Errors carry the offending
/// 1-based line number.
Mesh parse_mesh(const std::string& bytes, MeshFormat format);

/// Serializes to OFF or OBJ text. parse_mesh(write_mesh(m, f), f) reproduces
/// m exactly (coordinates are printed with round-trip precision).
std::string write_mesh(const Mesh& mesh, MeshFormat format);

Mesh read_mesh_file(const std::string& path);
void write_mesh_file(const Mesh& mesh, const std::string& path);

Adjacency build_adjacency(const Mesh& mesh);

/// Translates the centroid to the origin and scales so the farthest vertex
/// sits at distance 1. Keeps walk inputs in [-1, 1] across models.
Mesh normalize_mesh(const Mesh& mesh);

Vec3 centroid(const Mesh& mesh);
double bounding_radius(const Mesh& mesh);  // max |v - centroid|

inline MeshFormat format_from_path(const std::string& path) {
    auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == "off") return MeshFormat::OFF;
    if (ext == "obj") return MeshFormat::OBJ;
    throw DataError("unrecognized mesh extension: " + path);
}

}  // namespace walkfeat
