#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace tracshape {

using Vec3 = Eigen::Vector3d;
using Index = std::int32_t;

/// Simplex connectivity. Triangles use the first three slots; the fourth is -1.
using Element = std::array<Index, 4>;

/// Duplicate-node tolerance in meters.
inline constexpr double kCoincidentTolerance = 1e-12;

/// Local facet `local` of `element` is the facet opposite local node `local`.
struct FacetRef {
  Index element = 0;
  Index local = 0;
  auto operator<=>(const FacetRef&) const = default;
};

enum class RegionKind { nodes, facets };

struct RegionTag {
  std::string name;
  RegionKind kind = RegionKind::nodes;
  std::vector<Index> nodes;      // kind == nodes, sorted and unique
  std::vector<FacetRef> facets;  // kind == facets, sorted and unique
};

/// Linear simplex mesh: tri3 (plane stress, with thickness) or tet4.
///
/// Values are immutable once built. Coordinates are meters; 2D meshes keep z = 0.
/// The constructor does not validate; use validate() or load_mesh() for that.
class Mesh {
 public:
  Mesh() = default;
  Mesh(int dimension, double thickness, std::vector<Vec3> nodes, std::vector<Element> elements,
       std::map<std::string, RegionTag> regions);

  int dimension() const { return dimension_; }
  int nodes_per_element() const { return dimension_ + 1; }
  double thickness() const { return thickness_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t element_count() const { return elements_.size(); }
  std::size_t dof_count() const { return nodes_.size() * static_cast<std::size_t>(dimension_); }

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const Vec3& node(Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Element>& elements() const { return elements_; }
  const Element& element(Index e) const { return elements_[static_cast<std::size_t>(e)]; }
  std::span<const Index> element_nodes(Index e) const {
    return {elements_[static_cast<std::size_t>(e)].data(), static_cast<std::size_t>(dimension_ + 1)};
  }

  const std::map<std::string, RegionTag>& regions() const { return regions_; }
  bool has_region(const std::string& name) const { return regions_.count(name) != 0; }
  /// Throws ValidationError when the region does not exist.
  const RegionTag& region(const std::string& name) const;

  /// Same topology and regions, new coordinates.
  Mesh with_nodes(std::vector<Vec3> nodes) const;

 private:
  int dimension_ = 3;
  double thickness_ = 1.0;
  std::vector<Vec3> nodes_;
  std::vector<Element> elements_;
  std::map<std::string, RegionTag> regions_;
};

struct MeshReport {
  double volume = 0.0;
  double surface_area = 0.0;
  double min_quality = 0.0;
  Index worst_element = -1;
  bool is_valid = false;
  std::vector<std::string> messages;
};

/// Boundary facet with outward orientation. `nodes` holds 3 indices (tet) or 2 (tri, last is -1).
struct BoundaryFacet {
  FacetRef ref;
  std::array<Index, 3> nodes{-1, -1, -1};
  Vec3 normal = Vec3::Zero();  // unit, outward
  double area = 0.0;           // edge length * thickness in 2D
};

// ---- element geometry ------------------------------------------------------

/// Local node indices of facet `local`, ordered so the right-hand normal points outward
/// for a positively oriented element.
std::span<const int> facet_local_nodes(int dimension, int local);

/// Signed area (2D, without thickness) or signed volume (3D).
double signed_measure(const Mesh& mesh, Index element);

/// |signed_measure| times thickness in 2D.
double element_volume(const Mesh& mesh, Index element);

/// Radius-ratio quality normalized so the regular simplex scores 1; 0 for degenerate elements.
double element_quality(const Mesh& mesh, Index element);

double min_edge_length(const Mesh& mesh);

// ---- operations ------------------------------------------------------------

/// Reports every invariant violation; never throws.
MeshReport validate(const Mesh& mesh);

/// Volume, surface area and quality. Throws ValidationError for an invalid mesh.
MeshReport measure(const Mesh& mesh);

/// Facets incident to exactly one element, sorted by (element, local facet), outward normals.
/// Throws ValidationError on a facet shared by more than two elements.
std::vector<BoundaryFacet> extract_boundary(const Mesh& mesh);

/// Geometry of one facet (normal and area as seen from its element).
BoundaryFacet boundary_facet(const Mesh& mesh, FacetRef ref);

/// Nodes of a region: the members of a node set, or the union of facet nodes.
std::vector<Index> region_nodes(const Mesh& mesh, const std::string& name);

/// Sorted unique nodes lying on the boundary.
std::vector<Index> boundary_nodes(const Mesh& mesh);

/// Groups of point indices closer than `tolerance`; maps each point to the smallest index of its group.
std::vector<Index> weld_points(std::span<const Vec3> points, double tolerance);

// ---- native JSON format ----------------------------------------------------

/// Parses the native JSON mesh document. Inverted elements are repaired by swapping their last two
/// nodes (facet references are remapped) and a warning is appended to `warnings`.
/// Throws ParseError for malformed documents and ValidationError for invalid meshes.
Mesh load_mesh(std::istream& in, std::vector<std::string>* warnings = nullptr);
Mesh load_mesh_file(const std::string& path, std::vector<std::string>* warnings = nullptr);

/// Writes the native JSON document with round-trip exact coordinates.
void save_mesh(std::ostream& out, const Mesh& mesh);
std::string mesh_to_json(const Mesh& mesh);

}  // namespace tracshape
