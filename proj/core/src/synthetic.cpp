#include "walkfeat/synthetic.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <random>

#include "walkfeat/rng.hpp"

namespace walkfeat {

namespace {

constexpr double kPi = std::numbers::pi;

void check_params(SyntheticClass cls, const SynthParams& p) {
    if (p.subdivisions < 0 || p.subdivisions > 6)
        throw ConfigError("sphere subdivisions must be in [0, 6]");
    if (p.segments < 6 || p.segments > 512)
        throw ConfigError("segments must be in [6, 512]");
    if (p.rings < 2 || p.rings > 512)
        throw ConfigError("rings must be in [2, 512]");
    if (cls == SyntheticClass::Torus && (p.tube_ratio <= 0.0 || p.tube_ratio >= 1.0))
        throw ConfigError("torus tube_ratio must be strictly inside (0, 1)");
    if (p.aspect_min <= 0.0 || p.aspect_min > p.aspect_max || p.aspect_max > 10.0)
        throw ConfigError("aspect range must satisfy 0 < min <= max <= 10");
}

// --- icosphere ------------------------------------------------------------

Mesh icosphere(int subdivisions) {
    // Icosahedron from three orthogonal golden rectangles.
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    m.vertices = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& v : m.vertices) v.normalize();
    m.faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 p = (m.vertices[a] + m.vertices[b]).normalized();
            int idx = static_cast<int>(m.vertices.size());
            m.vertices.push_back(p);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(m.faces.size() * 4);
        for (const auto& f : m.faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    return m;
}

// --- box ------------------------------------------------------------------

Mesh box(int grid) {
    Mesh m;
    std::map<std::array<std::int64_t, 3>, int> dedup;
    auto vertex = [&](double x, double y, double z) {
        // Grid points on adjacent sides are computed from the same i/n
        // expressions, so exact bit keys weld the cube edges.
        std::array<std::int64_t, 3> key;
        double c[3] = {x, y, z};
        std::memcpy(key.data(), c, sizeof(c));
        auto it = dedup.find(key);
        if (it != dedup.end()) return it->second;
        int idx = static_cast<int>(m.vertices.size());
        m.vertices.emplace_back(x, y, z);
        dedup.emplace(key, idx);
        return idx;
    };

    // Each side is a grid x grid quad patch; axis = fixed coordinate, sign
    // picks the face, (u, v) span the other two axes.
    auto coord = [&](int i) { return -1.0 + 2.0 * static_cast<double>(i) / grid; };
    for (int axis = 0; axis < 3; ++axis) {
        for (int sign = -1; sign <= 1; sign += 2) {
            for (int i = 0; i < grid; ++i) {
                for (int j = 0; j < grid; ++j) {
                    auto at = [&](int a, int b) {
                        double u = coord(a), v = coord(b), w = static_cast<double>(sign);
                        double p[3];
                        p[axis] = w;
                        p[(axis + 1) % 3] = u;
                        p[(axis + 2) % 3] = v;
                        return vertex(p[0], p[1], p[2]);
                    };
                    int v00 = at(i, j), v10 = at(i + 1, j);
                    int v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
                    if (sign > 0) {
                        m.faces.push_back({v00, v10, v11});
                        m.faces.push_back({v00, v11, v01});
                    } else {
                        m.faces.push_back({v00, v11, v10});
                        m.faces.push_back({v00, v01, v11});
                    }
                }
            }
        }
    }
    return m;
}

// --- cylinder ---------------------------------------------------------------

Mesh cylinder(int segments, int rings) {
    Mesh m;
    // rings+1 circles of `segments` vertices along the height, plus two cap
    // centers. Height spans [-1, 1], radius 0.7 before aspect randomization.
    const double radius = 0.7;
    for (int r = 0; r <= rings; ++r) {
        double z = -1.0 + 2.0 * static_cast<double>(r) / rings;
        for (int s = 0; s < segments; ++s) {
            double a = 2.0 * kPi * s / segments;
            m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
        }
    }
    int bottom_center = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(0, 0, -1.0);
    int top_center = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(0, 0, 1.0);

    auto ring_vertex = [&](int r, int s) { return r * segments + (s % segments); };
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            int v00 = ring_vertex(r, s), v01 = ring_vertex(r, s + 1);
            int v10 = ring_vertex(r + 1, s), v11 = ring_vertex(r + 1, s + 1);
            m.faces.push_back({v00, v01, v11});
            m.faces.push_back({v00, v11, v10});
        }
    }
    for (int s = 0; s < segments; ++s) {
        m.faces.push_back({bottom_center, ring_vertex(0, s + 1), ring_vertex(0, s)});
        m.faces.push_back({top_center, ring_vertex(rings, s), ring_vertex(rings, s + 1)});
    }
    return m;
}

// --- torus ------------------------------------------------------------------

Mesh torus(int segments, int rings, double tube_ratio) {
    Mesh m;
    const double major = 1.0, minor = tube_ratio;
    for (int s = 0; s < segments; ++s) {
        double u = 2.0 * kPi * s / segments;
        for (int r = 0; r < rings; ++r) {
            double v = 2.0 * kPi * r / rings;
            double w = major + minor * std::cos(v);
            m.vertices.emplace_back(w * std::cos(u), w * std::sin(u), minor * std::sin(v));
        }
    }
    auto vid = [&](int s, int r) { return (s % segments) * rings + (r % rings); };
    for (int s = 0; s < segments; ++s) {
        for (int r = 0; r < rings; ++r) {
            int v00 = vid(s, r), v01 = vid(s, r + 1);
            int v10 = vid(s + 1, r), v11 = vid(s + 1, r + 1);
            m.faces.push_back({v00, v01, v11});
            m.faces.push_back({v00, v11, v10});
        }
    }
    return m;
}

// --- cone -------------------------------------------------------------------

Mesh cone(int segments) {
    Mesh m;
    const double radius = 0.8;
    for (int s = 0; s < segments; ++s) {
        double a = 2.0 * kPi * s / segments;
        m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -1.0);
    }
    int apex = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(0, 0, 1.0);
    int base_center = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(0, 0, -1.0);
    for (int s = 0; s < segments; ++s) {
        int a = s, b = (s + 1) % segments;
        m.faces.push_back({a, b, apex});
        m.faces.push_back({base_center, b, a});
    }
    return m;
}

int jitter_count(int base, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(0.75, 1.25);
    int n = static_cast<int>(std::lround(base * d(rng)));
    return std::max(n, 6);
}

}  // namespace

SyntheticClass synthetic_class_from_name(const std::string& name) {
    if (name == "sphere") return SyntheticClass::Sphere;
    if (name == "box") return SyntheticClass::Box;
    if (name == "cylinder") return SyntheticClass::Cylinder;
    if (name == "torus") return SyntheticClass::Torus;
    if (name == "cone") return SyntheticClass::Cone;
    throw ConfigError("unknown synthetic class: " + name);
}

std::string synthetic_class_name(SyntheticClass c) {
    switch (c) {
        case SyntheticClass::Sphere: return "sphere";
        case SyntheticClass::Box: return "box";
        case SyntheticClass::Cylinder: return "cylinder";
        case SyntheticClass::Torus: return "torus";
        case SyntheticClass::Cone: return "cone";
    }
    throw ConfigError("invalid synthetic class value");
}

Mesh gen_synthetic(SyntheticClass cls, const SynthParams& params, std::uint64_t seed) {
    check_params(cls, params);
    auto rng = make_rng(derive_seed(seed, "synthetic", static_cast<std::uint64_t>(cls)));

    Mesh m;
    switch (cls) {
        case SyntheticClass::Sphere:
            // Face count is pinned by `subdivisions`; no density jitter here.
            m = icosphere(params.subdivisions);
            break;
        case SyntheticClass::Box: {
            int grid = params.randomize
                           ? std::max(2, static_cast<int>(std::lround(
                                             (params.segments / 4.0) *
                                             std::uniform_real_distribution<double>(0.75, 1.25)(rng))))
                           : std::max(2, params.segments / 4);
            m = box(grid);
            break;
        }
        case SyntheticClass::Cylinder: {
            int seg = params.randomize ? jitter_count(params.segments, rng) : params.segments;
            int rg = params.randomize
                         ? std::max(2, static_cast<int>(std::lround(
                                           params.rings *
                                           std::uniform_real_distribution<double>(0.75, 1.25)(rng))))
                         : params.rings;
            m = cylinder(seg, rg);
            break;
        }
        case SyntheticClass::Torus: {
            int seg = params.randomize ? jitter_count(params.segments, rng) : params.segments;
            int rg = params.randomize ? std::max(3, jitter_count(params.rings, rng)) : params.rings;
            m = torus(seg, std::max(rg, 3), params.tube_ratio);
            break;
        }
        case SyntheticClass::Cone: {
            int seg = params.randomize ? jitter_count(params.segments, rng) : params.segments;
            m = cone(seg);
            break;
        }
    }

    if (params.randomize) {
        std::uniform_real_distribution<double> aspect(params.aspect_min, params.aspect_max);
        Vec3 scale(aspect(rng), aspect(rng), aspect(rng));

        // Shoemake's uniform random rotation.
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
        Eigen::Quaterniond q(std::sqrt(u1) * std::cos(2 * kPi * u3),
                             std::sqrt(1 - u1) * std::sin(2 * kPi * u2),
                             std::sqrt(1 - u1) * std::cos(2 * kPi * u2),
                             std::sqrt(u1) * std::sin(2 * kPi * u3));
        Eigen::Matrix3d rot = q.normalized().toRotationMatrix();

        for (auto& v : m.vertices) v = rot * v.cwiseProduct(scale);
    }

    m.label = synthetic_class_name(cls);
    validate_mesh(m);
    return m;
}

}  // namespace walkfeat
