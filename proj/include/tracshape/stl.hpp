#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tracshape/mesh.hpp"

namespace tracshape {

struct SurfaceTriangle {
  std::array<Vec3, 3> vertices;  // counter-clockwise seen from outside
  Vec3 normal = Vec3::Zero();    // unit, outward
};

/// Triangle soup in source units (m). `scale` multiplies coordinates on export (1000: m to mm).
struct SurfaceModel {
  std::vector<SurfaceTriangle> triangles;
  double scale = 1000.0;
};

/// Boundary facets of a 3D mesh in extract_boundary order. Throws ValidationError for a 2D mesh or a
/// non-manifold boundary.
SurfaceModel surface_mesh(const Mesh& mesh, double scale = 1000.0);

enum class StlFormat { binary, ascii };

/// Binary: 80-byte header starting "tracshape" padded with spaces, uint32 count, 50-byte records of
/// little-endian float32 (normal, 3 vertices) and a zero attribute word. ASCII uses 9 significant digits.
std::string write_stl(const SurfaceModel& surface, StlFormat format, const std::string& name = "tracshape");

void write_stl_file(const std::string& path, const SurfaceModel& surface, StlFormat format);

/// Parses either flavour. Coordinates are returned as stored in the file, with scale 1.
/// Throws ParseError on malformed input.
SurfaceModel read_stl(std::string_view bytes);

struct EdgeDefect {
  std::array<Index, 2> vertices;  // welded vertex ids
  int incidence = 0;
};

struct ManifoldReport {
  bool watertight = false;
  std::vector<EdgeDefect> edge_defects;  // edges not shared by exactly two triangles
  bool winding_consistent = false;
  bool self_intersection_checked = false;  // never checked
};

/// Edge incidence on vertices welded within `weld_tolerance` (source units).
ManifoldReport check_manifold(const SurfaceModel& surface, double weld_tolerance = 1e-9);

struct DraftViolation {
  std::size_t triangle = 0;
  double angle = 0.0;  // degrees
};

struct DraftReport {
  Vec3 pull = Vec3::UnitZ();
  double min_angle = 0.0;  // degrees
  std::vector<DraftViolation> violations;
};

/// Draft angle of a face = asin(|n . pull|). A face violates when that angle is below `min_angle`, so
/// walls parallel to the pull direction are flagged. Throws ValidationError unless |pull| = 1 +- 1e-9 and
/// 0 <= min_angle < 90.
DraftReport draft_check(const SurfaceModel& surface, const Vec3& pull, double min_angle);

/// Divergence-theorem volume in source units.
double signed_volume(const SurfaceModel& surface);

double surface_area(const SurfaceModel& surface);

/// Sum of area * normal; zero for a closed surface.
Vec3 area_weighted_normal_sum(const SurfaceModel& surface);

}  // namespace tracshape
