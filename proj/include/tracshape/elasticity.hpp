#pragma once

// Internal helpers shared by the solver and the sensitivity code.

#include <vector>

#include "tracshape/errors.hpp"
#include "tracshape/fem.hpp"
#include "tracshape/simplex.hpp"

namespace tracshape {

simplex::Lame lame_parameters(const Material& material, ElasticModel model);

namespace elasticity {

template <int Dim>
Eigen::Matrix<double, Dim, Dim + 1> gather_nodal(const Mesh& mesh, Index e, const Vector& field) {
  Eigen::Matrix<double, Dim, Dim + 1> out;
  const auto& conn = mesh.element(e);
  for (int a = 0; a <= Dim; ++a) out.col(a) = field.segment<Dim>(conn[static_cast<std::size_t>(a)] * Dim);
  return out;
}

/// A loaded facet with its outward area vector (3D: half the edge cross product; 2D: thickness
/// times the edge rotated outward) and the total area of its region.
struct LoadFacet {
  BoundaryFacet facet;
  Vec3 area_vector = Vec3::Zero();
  double region_area = 0.0;
};

inline Vec3 area_vector(const Mesh& mesh, const BoundaryFacet& f) {
  if (mesh.dimension() == 3) {
    const Vec3& x0 = mesh.node(f.nodes[0]);
    return 0.5 * (mesh.node(f.nodes[1]) - x0).cross(mesh.node(f.nodes[2]) - x0);
  }
  const Vec3 d = mesh.node(f.nodes[1]) - mesh.node(f.nodes[0]);
  return mesh.thickness() * Vec3(d.y(), -d.x(), 0.0);
}

inline std::vector<LoadFacet> load_facets(const Mesh& mesh, const RegionTag& tag) {
  std::vector<LoadFacet> out;
  double total = 0.0;
  for (const auto& ref : tag.facets) {
    LoadFacet lf;
    lf.facet = boundary_facet(mesh, ref);
    lf.area_vector = area_vector(mesh, lf.facet);
    total += lf.area_vector.norm();
    out.push_back(lf);
  }
  for (auto& lf : out) lf.region_area = total;
  return out;
}

/// Force carried by each node of the facet.
inline Vec3 nodal_share(const NeumannCondition& load, const LoadFacet& lf) {
  const double per_node = 1.0 / (lf.facet.nodes[2] < 0 ? 2.0 : 3.0);
  if (load.kind == NeumannKind::pressure) return load.pressure * per_node * lf.area_vector;
  if (!(lf.region_area > 0.0)) throw ValidationError("load region '" + load.region + "' has zero area");
  return load.vector * (lf.area_vector.norm() / lf.region_area * per_node);
}

}  // namespace elasticity
}  // namespace tracshape
