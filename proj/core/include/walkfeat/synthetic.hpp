#pragma once

#include <cstdint>
#include <string>

#include "walkfeat/mesh.hpp"

namespace walkfeat {

enum class SyntheticClass { Sphere, Box, Cylinder, Torus, Cone };

SyntheticClass synthetic_class_from_name(const std::string& name);
std::string synthetic_class_name(SyntheticClass c);

/// Shape parameters for gen_synthetic. Documented ranges:
///   subdivisions  sphere icosphere depth, 0..6 (face count is 20 * 4^s)
///   segments      ring resolution for cylinder/cone/torus, 6..512
///   rings         tube/height resolution for torus/cylinder, 2..512
///   tube_ratio    torus minor/major radius, strictly inside (0, 1)
///   aspect range  per-axis random scale drawn from [aspect_min, aspect_max]
struct SynthParams {
    int subdivisions = 2;
    int segments = 20;
    int rings = 10;
    double tube_ratio = 0.35;
    double aspect_min = 0.65;
    double aspect_max = 1.55;
    bool randomize = true;  // aspect ratio, rotation, tessellation jitter
};

/// Builds a watertight triangulated primitive with seed-randomized aspect
/// ratio, orientation, and (where the primitive allows it) tessellation
/// density. Pure function of (class, params, seed); label is the class name.
Mesh gen_synthetic(SyntheticClass cls, const SynthParams& params, std::uint64_t seed);

}  // namespace walkfeat
