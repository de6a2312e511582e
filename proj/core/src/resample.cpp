#include "walkfeat/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <unordered_set>

namespace walkfeat {

namespace {

using Quadric = Eigen::Matrix4d;

Quadric face_quadric(const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 n = (b - a).cross(c - a);
    double area2 = n.norm();
    if (area2 < 1e-18) return Quadric::Zero();
    n /= area2;
    Eigen::Vector4d plane(n.x(), n.y(), n.z(), -n.dot(a));
    // Area weighting keeps the metric tessellation-independent.
    return 0.5 * area2 * (plane * plane.transpose());
}

double quadric_cost(const Quadric& q, const Vec3& p) {
    Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
    return h.dot(q * h);
}

struct Candidate {
    double cost;
    int u, v;
    Vec3 target;
    int ver_u, ver_v;
};
struct CandidateOrder {
    bool operator()(const Candidate& a, const Candidate& b) const { return a.cost > b.cost; }
};

// Edge-collapse state over index arrays; no halfedge structure needed at
// these mesh sizes.
struct Collapser {
    std::vector<Vec3> pos;
    std::vector<Quadric> quadric;
    std::vector<std::array<int, 3>> faces;
    std::vector<bool> face_alive;
    std::vector<bool> vertex_alive;
    std::vector<std::unordered_set<int>> vfaces;  // vertex -> incident alive faces
    std::vector<int> version;                     // bumped when a vertex moves/merges
    int alive_count = 0;
    double radius_cap = 0.0;  // candidate positions beyond this are rejected

    explicit Collapser(const Mesh& mesh) {
        pos = mesh.vertices;
        faces = mesh.faces;
        face_alive.assign(faces.size(), true);
        vertex_alive.assign(pos.size(), true);
        version.assign(pos.size(), 0);
        vfaces.resize(pos.size());
        quadric.assign(pos.size(), Quadric::Zero());
        alive_count = static_cast<int>(faces.size());
        for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
            const auto& t = faces[f];
            Quadric q = face_quadric(pos[t[0]], pos[t[1]], pos[t[2]]);
            for (int k = 0; k < 3; ++k) {
                quadric[t[k]] += q;
                vfaces[t[k]].insert(f);
            }
        }
        Vec3 c = Vec3::Zero();
        for (const auto& p : pos) c += p;
        c /= static_cast<double>(pos.size());
        for (const auto& p : pos) radius_cap = std::max(radius_cap, (p - c).norm());
        radius_cap = std::max(radius_cap * 1.04, 1e-9);
        center = c;
    }

    Vec3 center = Vec3::Zero();

    bool edge_exists(int u, int v) const {
        const auto& small = vfaces[u].size() <= vfaces[v].size() ? vfaces[u] : vfaces[v];
        int other = vfaces[u].size() <= vfaces[v].size() ? v : u;
        for (int f : small) {
            const auto& t = faces[f];
            if (t[0] == other || t[1] == other || t[2] == other) return true;
        }
        return false;
    }

    Candidate make_candidate(int u, int v) const {
        Quadric q = quadric[u] + quadric[v];
        Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
        Vec3 rhs = -q.block<3, 1>(0, 3);

        const Vec3 mid = 0.5 * (pos[u] + pos[v]);
        std::vector<Vec3> options = {pos[u], pos[v], mid};
        double scale = a.cwiseAbs().maxCoeff();
        if (scale > 0 && std::abs(a.determinant()) > 1e-10 * scale * scale * scale) {
            Vec3 opt = a.ldlt().solve(rhs);
            // A near-flat quadric has a whole valley of minima; keep the
            // solve only when it lands near the edge it replaces.
            const double locality = 4.0 * (pos[u] - pos[v]).norm();
            if ((opt - center).norm() <= radius_cap && (opt - mid).norm() <= locality)
                options.push_back(opt);
        }
        double best = std::numeric_limits<double>::infinity();
        Vec3 best_pos = options[2];
        for (const auto& p : options) {
            double c = quadric_cost(q, p);
            if (c < best) {
                best = c;
                best_pos = p;
            }
        }
        return Candidate{best, u, v, best_pos, version[u], version[v]};
    }

    // Shared vertex neighbors of u and v (link of the edge). Interior
    // manifold edges have exactly two; more means the collapse would pinch
    // the surface.
    int link_size(int u, int v) const {
        std::unordered_set<int> nu;
        for (int f : vfaces[u]) {
            for (int x : faces[f])
                if (x != u) nu.insert(x);
        }
        int shared = 0;
        std::unordered_set<int> seen;
        for (int f : vfaces[v]) {
            for (int x : faces[f]) {
                if (x != v && x != u && nu.count(x) && seen.insert(x).second) ++shared;
            }
        }
        return shared;
    }

    bool collapse_ok(int u, int v, const Vec3& target) const {
        int link = link_size(u, v);
        if (link != 2 && link != 1) return false;

        for (int who : {u, v}) {
            int other = who == u ? v : u;
            for (int f : vfaces[who]) {
                const auto& t = faces[f];
                bool has_other = t[0] == other || t[1] == other || t[2] == other;
                if (has_other) continue;  // face dies with the collapse
                Vec3 p[3], q[3];
                for (int k = 0; k < 3; ++k) {
                    p[k] = pos[t[k]];
                    q[k] = t[k] == who ? target : pos[t[k]];
                }
                Vec3 n0 = (p[1] - p[0]).cross(p[2] - p[0]);
                Vec3 n1 = (q[1] - q[0]).cross(q[2] - q[0]);
                if (n1.norm() < 1e-14) return false;     // face collapses to a sliver
                if (n0.dot(n1) <= 0.0) return false;      // normal flip
            }
        }
        return true;
    }

    // Applies the collapse of v into u at `target`. Faces containing both
    // endpoints die; the rest of v's fan is rewired to u.
    void apply(int u, int v, const Vec3& target) {
        pos[u] = target;
        quadric[u] += quadric[v];

        std::vector<int> dying;
        for (int f : vfaces[u]) {
            const auto& t = faces[f];
            if (t[0] == v || t[1] == v || t[2] == v) dying.push_back(f);
        }
        for (int f : dying) {
            face_alive[f] = false;
            --alive_count;
            for (int x : faces[f]) vfaces[x].erase(f);
        }
        for (int f : std::vector<int>(vfaces[v].begin(), vfaces[v].end())) {
            auto& t = faces[f];
            for (int k = 0; k < 3; ++k)
                if (t[k] == v) t[k] = u;
            vfaces[v].erase(f);
            vfaces[u].insert(f);
        }
        vertex_alive[v] = false;
        ++version[u];
        ++version[v];
    }

    // Two surviving faces around the merged vertex must not cover the same
    // vertex triple.
    bool creates_duplicate_faces(int u, int v) const {
        std::vector<std::array<int, 3>> merged;
        std::unordered_set<int> considered;
        for (int who : {u, v}) {
            for (int f : vfaces[who]) {
                if (!considered.insert(f).second) continue;
                auto t = faces[f];
                bool has_u = false, has_v = false;
                for (int x : t) {
                    has_u |= x == u;
                    has_v |= x == v;
                }
                if (has_u && has_v) continue;  // dies with the collapse
                for (int& x : t)
                    if (x == v) x = u;
                std::sort(t.begin(), t.end());
                merged.push_back(t);
            }
        }
        std::sort(merged.begin(), merged.end());
        return std::adjacent_find(merged.begin(), merged.end()) != merged.end();
    }

    Mesh extract(const Mesh& origin) const {
        Mesh out;
        out.source_id = origin.source_id;
        out.label = origin.label;
        std::vector<int> remap(pos.size(), -1);
        for (std::size_t f = 0; f < faces.size(); ++f) {
            if (!face_alive[f]) continue;
            std::array<int, 3> tri{};
            for (int k = 0; k < 3; ++k) {
                int vi = faces[f][k];
                if (remap[vi] < 0) {
                    remap[vi] = static_cast<int>(out.vertices.size());
                    out.vertices.push_back(pos[vi]);
                }
                tri[k] = remap[vi];
            }
            out.faces.push_back(tri);
        }
        return out;
    }
};

}  // namespace

void validate_targets(const ResampleTargets& targets) {
    if (targets.face_counts.empty()) throw ConfigError("resample targets are empty");
    int prev = 0;
    for (int t : targets.face_counts) {
        if (t <= 0) throw ConfigError("resample target must be positive");
        if (t <= prev) throw ConfigError("resample targets must be strictly ascending");
        prev = t;
    }
    if (targets.tolerance < 0.0 || targets.tolerance >= 1.0)
        throw ConfigError("resample tolerance must be in [0, 1)");
}

Mesh simplify(const Mesh& mesh, int target_faces) {
    validate_mesh(mesh);
    if (target_faces >= static_cast<int>(mesh.faces.size()))
        throw DataError("simplify target " + std::to_string(target_faces) +
                        " is not below current face count " + std::to_string(mesh.faces.size()));
    if (target_faces < 1) throw DataError("simplify target must be positive");

    Collapser state(mesh);

    while (state.alive_count > target_faces) {
        // (Re)build the candidate heap from the current edges. Rebuilding on
        // exhaustion gives rejected collapses another chance after the
        // surrounding geometry has changed.
        std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> heap;
        std::set<std::pair<int, int>> pushed;
        for (std::size_t f = 0; f < state.faces.size(); ++f) {
            if (!state.face_alive[f]) continue;
            const auto& t = state.faces[f];
            for (int e = 0; e < 3; ++e) {
                auto key = std::minmax(t[e], t[(e + 1) % 3]);
                if (pushed.insert(key).second)
                    heap.push(state.make_candidate(key.first, key.second));
            }
        }

        bool progress = false;
        while (!heap.empty() && state.alive_count > target_faces) {
            Candidate c = heap.top();
            heap.pop();
            if (!state.vertex_alive[c.u] || !state.vertex_alive[c.v]) continue;
            if (state.version[c.u] != c.ver_u || state.version[c.v] != c.ver_v) continue;
            if (!state.edge_exists(c.u, c.v)) continue;
            if (!state.collapse_ok(c.u, c.v, c.target)) continue;
            if (state.creates_duplicate_faces(c.u, c.v)) continue;

            state.apply(c.u, c.v, c.target);
            progress = true;

            // Refresh costs for the edges around the merged vertex.
            std::unordered_set<int> nbrs;
            for (int f : state.vfaces[c.u]) {
                for (int x : state.faces[f])
                    if (x != c.u) nbrs.insert(x);
            }
            for (int w : nbrs) heap.push(state.make_candidate(c.u, w));
        }

        if (state.alive_count <= target_faces) break;
        if (!progress)
            throw DataError("simplify cannot reach " + std::to_string(target_faces) +
                            " faces without degenerate geometry; best achievable is " +
                            std::to_string(state.alive_count));
    }

    Mesh out = state.extract(mesh);
    validate_mesh(out);
    return out;
}

Mesh subdivide(const Mesh& mesh) {
    validate_mesh(mesh);
    Mesh out;
    out.source_id = mesh.source_id;
    out.label = mesh.label;
    out.vertices = mesh.vertices;
    out.faces.reserve(mesh.faces.size() * 4);

    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        int idx = static_cast<int>(out.vertices.size());
        out.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
        midpoint.emplace(key, idx);
        return idx;
    };

    for (const auto& f : mesh.faces) {
        int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
        out.faces.push_back({f[0], ab, ca});
        out.faces.push_back({f[1], bc, ab});
        out.faces.push_back({f[2], ca, bc});
        out.faces.push_back({ab, bc, ca});
    }
    return out;
}

std::vector<Mesh> resample_to(const Mesh& mesh, const ResampleTargets& targets) {
    validate_mesh(mesh);
    validate_targets(targets);
    std::vector<Mesh> out;
    out.reserve(targets.face_counts.size());
    for (int target : targets.face_counts) {
        int have = static_cast<int>(mesh.faces.size());
        if (have == target) {
            out.push_back(mesh);
            continue;
        }
        Mesh work = mesh;
        while (static_cast<int>(work.faces.size()) < target) work = subdivide(work);
        if (static_cast<int>(work.faces.size()) > target) work = simplify(work, target);
        out.push_back(std::move(work));
    }
    return out;
}

}  // namespace walkfeat
