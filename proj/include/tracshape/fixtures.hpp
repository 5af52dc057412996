#pragma once

#include <map>
#include <string>
#include <vector>

#include "tracshape/mesh.hpp"

namespace tracshape {

using FixtureParams = std::map<std::string, double>;

/// Parametric benchmark meshes. Every fixture carries the regions
///   "load"   facet set where the benchmark load acts,
///   "pin"    facet set that is clamped,
///   "frozen" node set excluded from shape change,
///   "design" node set = boundary nodes minus frozen.
///
/// | name              | parameters (defaults)                                         |
/// |-------------------|---------------------------------------------------------------|
/// | bar3d             | L=1, a=0.1, n=2 cells across; nx defaults to round(n L / a)   |
/// | cantilever2d      | L=1, h=0.05, t=0.01, n=4 cells through the depth              |
/// | plate_with_hole2d | L=0.1, W=0.05, r=0.01, t=0.005, n=8 segments per half edge    |
/// | ring2d            | r_in=0.02, r_out=0.04, t=0.005, n=16 segments around          |
/// | lug3d             | L=0.12, W=0.06, T=0.02, r=0.015, n=4, nz=3 layers             |
///
/// bar3d also carries the single-node sets "support_origin" (0,0,0) and "support_y" (0,a,0): with "pin" fixed
/// in x only, fixing support_origin in y,z and support_y in z removes the rigid modes without restraining
/// lateral contraction.
///
/// Throws ValidationError for an unknown name, unknown parameter, or degenerate geometry.
Mesh make_fixture(const std::string& name, const FixtureParams& params = {});

std::vector<std::string> fixture_names();

}  // namespace tracshape
