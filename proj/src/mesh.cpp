#include "tracshape/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tracshape/errors.hpp"

namespace tracshape {

namespace {

constexpr int kTetFacets[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
constexpr int kTriFacets[3][2] = {{1, 2}, {2, 0}, {0, 1}};

using FacetKey = std::array<Index, 3>;

FacetKey facet_key(const Mesh& mesh, Index e, int local) {
  const auto local_nodes = facet_local_nodes(mesh.dimension(), local);
  FacetKey key{-1, -1, -1};
  const auto& conn = mesh.element(e);
  for (std::size_t i = 0; i < local_nodes.size(); ++i) key[i] = conn[static_cast<std::size_t>(local_nodes[i])];
  std::sort(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(local_nodes.size()));
  return key;
}

bool element_indices_ok(const Mesh& mesh, Index e) {
  const auto n = static_cast<Index>(mesh.node_count());
  for (Index v : mesh.element_nodes(e)) {
    if (v < 0 || v >= n) return false;
  }
  return true;
}

struct FacetIncidence {
  FacetKey key;
  FacetRef ref;
};

/// All facets of elements with valid indices, sorted by key then ref.
std::vector<FacetIncidence> facet_incidence(const Mesh& mesh) {
  std::vector<FacetIncidence> all;
  const int nf = mesh.nodes_per_element();
  all.reserve(mesh.element_count() * static_cast<std::size_t>(nf));
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    if (!element_indices_ok(mesh, e)) continue;
    for (int f = 0; f < nf; ++f) all.push_back({facet_key(mesh, e, f), {e, f}});
  }
  std::sort(all.begin(), all.end(), [](const FacetIncidence& a, const FacetIncidence& b) {
    return a.key != b.key ? a.key < b.key : a.ref < b.ref;
  });
  return all;
}

}  // namespace

BoundaryFacet boundary_facet(const Mesh& mesh, FacetRef ref) {
  BoundaryFacet bf;
  bf.ref = ref;
  const auto local = facet_local_nodes(mesh.dimension(), ref.local);
  const auto& conn = mesh.element(ref.element);
  for (std::size_t i = 0; i < local.size(); ++i) bf.nodes[i] = conn[static_cast<std::size_t>(local[i])];
  if (mesh.dimension() == 3) {
    const Vec3 a = 0.5 * (mesh.node(bf.nodes[1]) - mesh.node(bf.nodes[0]))
                             .cross(mesh.node(bf.nodes[2]) - mesh.node(bf.nodes[0]));
    bf.area = a.norm();
    bf.normal = bf.area > 0.0 ? Vec3(a / bf.area) : Vec3::Zero();
  } else {
    const Vec3 d = mesh.node(bf.nodes[1]) - mesh.node(bf.nodes[0]);
    const double len = d.head<2>().norm();
    bf.area = len * mesh.thickness();
    bf.normal = len > 0.0 ? Vec3(d.y() / len, -d.x() / len, 0.0) : Vec3::Zero();
  }
  return bf;
}

namespace {

std::string join_indices(std::span<const Index> idx) {
  std::ostringstream os;
  for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? ", " : "") << idx[i];
  return os.str();
}

}  // namespace

Mesh::Mesh(int dimension, double thickness, std::vector<Vec3> nodes, std::vector<Element> elements,
           std::map<std::string, RegionTag> regions)
    : dimension_(dimension),
      thickness_(dimension == 2 ? thickness : 1.0),
      nodes_(std::move(nodes)),
      elements_(std::move(elements)),
      regions_(std::move(regions)) {
  if (dimension_ == 2) {
    for (auto& e : elements_) e[3] = -1;
  }
}

const RegionTag& Mesh::region(const std::string& name) const {
  auto it = regions_.find(name);
  if (it == regions_.end()) throw ValidationError("unknown region '" + name + "'");
  return it->second;
}

Mesh Mesh::with_nodes(std::vector<Vec3> nodes) const {
  Mesh m = *this;
  m.nodes_ = std::move(nodes);
  return m;
}

std::span<const int> facet_local_nodes(int dimension, int local) {
  if (dimension == 3) return {kTetFacets[local], 3};
  return {kTriFacets[local], 2};
}

double signed_measure(const Mesh& mesh, Index e) {
  const auto& c = mesh.element(e);
  const Vec3& x0 = mesh.node(c[0]);
  const Vec3 a = mesh.node(c[1]) - x0;
  const Vec3 b = mesh.node(c[2]) - x0;
  if (mesh.dimension() == 2) return 0.5 * (a.x() * b.y() - a.y() * b.x());
  const Vec3 d = mesh.node(c[3]) - x0;
  return a.dot(b.cross(d)) / 6.0;
}

double element_volume(const Mesh& mesh, Index e) {
  const double m = std::abs(signed_measure(mesh, e));
  return mesh.dimension() == 2 ? m * mesh.thickness() : m;
}

double element_quality(const Mesh& mesh, Index e) {
  const auto& c = mesh.element(e);
  if (mesh.dimension() == 2) {
    const Vec3 &p0 = mesh.node(c[0]), &p1 = mesh.node(c[1]), &p2 = mesh.node(c[2]);
    const double la = (p1 - p2).norm(), lb = (p2 - p0).norm(), lc = (p0 - p1).norm();
    const double area = std::abs(signed_measure(mesh, e));
    const double s = 0.5 * (la + lb + lc);
    const double denom = s * la * lb * lc;
    return denom > 0.0 ? 8.0 * area * area / denom : 0.0;
  }
  const Vec3& p0 = mesh.node(c[0]);
  const Vec3 a = mesh.node(c[1]) - p0;
  const Vec3 b = mesh.node(c[2]) - p0;
  const Vec3 d = mesh.node(c[3]) - p0;
  const double triple = a.dot(b.cross(d));
  const double volume = std::abs(triple) / 6.0;
  if (volume <= 0.0) return 0.0;
  double faces = 0.0;
  for (const auto& f : kTetFacets) {
    const Vec3& q0 = mesh.node(c[f[0]]);
    faces += 0.5 * (mesh.node(c[f[1]]) - q0).cross(mesh.node(c[f[2]]) - q0).norm();
  }
  const double inradius = 3.0 * volume / faces;
  const Vec3 center = (a.squaredNorm() * b.cross(d) + b.squaredNorm() * d.cross(a) + d.squaredNorm() * a.cross(b)) /
                      (2.0 * triple);
  return 3.0 * inradius / center.norm();
}

double min_edge_length(const Mesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  const int n = mesh.nodes_per_element();
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    const auto& c = mesh.element(e);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) best = std::min(best, (mesh.node(c[i]) - mesh.node(c[j])).norm());
  }
  return best;
}

std::vector<Index> weld_points(std::span<const Vec3> points, double tolerance) {
  const auto n = static_cast<Index>(points.size());
  std::vector<Index> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const Vec3 &p = points[static_cast<std::size_t>(a)], &q = points[static_cast<std::size_t>(b)];
    if (p.x() != q.x()) return p.x() < q.x();
    if (p.y() != q.y()) return p.y() < q.y();
    if (p.z() != q.z()) return p.z() < q.z();
    return a < b;
  });
  std::vector<Index> rep(points.size());
  std::iota(rep.begin(), rep.end(), 0);
  auto find = [&](Index i) {
    while (rep[static_cast<std::size_t>(i)] != i) i = rep[static_cast<std::size_t>(i)];
    return i;
  };
  for (Index i = 0; i < n; ++i) {
    const Vec3& p = points[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    for (Index j = i + 1; j < n; ++j) {
      const Vec3& q = points[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
      if (q.x() - p.x() > tolerance) break;
      if ((q - p).norm() <= tolerance) {
        const Index a = find(order[static_cast<std::size_t>(i)]);
        const Index b = find(order[static_cast<std::size_t>(j)]);
        rep[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
      }
    }
  }
  for (Index i = 0; i < n; ++i) rep[static_cast<std::size_t>(i)] = find(i);
  return rep;
}

MeshReport validate(const Mesh& mesh) {
  MeshReport report;
  auto& msg = report.messages;
  if (mesh.dimension() != 2 && mesh.dimension() != 3) {
    msg.push_back("dimension must be 2 or 3, got " + std::to_string(mesh.dimension()));
    return report;
  }
  if (mesh.dimension() == 2 && !(mesh.thickness() > 0.0))
    msg.push_back("thickness must be positive for 2D meshes");
  if (mesh.element_count() == 0) msg.push_back("mesh has no elements");

  const auto n = static_cast<Index>(mesh.node_count());
  std::vector<char> used(mesh.node_count(), 0);
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    if (!element_indices_ok(mesh, e)) {
      std::ostringstream os;
      os << "element " << e << " references a node outside [0, " << n << ")";
      msg.push_back(os.str());
      continue;
    }
    const auto conn = mesh.element_nodes(e);
    for (Index v : conn) used[static_cast<std::size_t>(v)] = 1;
    const double m = signed_measure(mesh, e);
    std::ostringstream os;
    if (m < 0.0) {
      os << "element " << e << " is inverted (signed measure " << m << ")";
      msg.push_back(os.str());
    } else if (m == 0.0) {
      os << "element " << e << " is degenerate (zero measure)";
      msg.push_back(os.str());
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (!used[static_cast<std::size_t>(i)]) msg.push_back("node " + std::to_string(i) + " is an orphan");
  }

  const auto rep = weld_points(mesh.nodes(), kCoincidentTolerance);
  std::map<Index, std::vector<Index>> groups;
  for (Index i = 0; i < n; ++i) {
    if (rep[static_cast<std::size_t>(i)] != i) groups[rep[static_cast<std::size_t>(i)]].push_back(i);
  }
  for (auto& [root, others] : groups) {
    others.insert(others.begin(), root);
    msg.push_back("duplicate nodes " + join_indices(others));
  }

  const auto incidence = facet_incidence(mesh);
  std::vector<FacetRef> boundary;
  for (std::size_t i = 0; i < incidence.size();) {
    std::size_t j = i;
    while (j < incidence.size() && incidence[j].key == incidence[i].key) ++j;
    if (j - i == 1) boundary.push_back(incidence[i].ref);
    if (j - i > 2) msg.push_back("non-manifold facet shared by " + std::to_string(j - i) + " elements (element " +
                                 std::to_string(incidence[i].ref.element) + ")");
    i = j;
  }
  std::sort(boundary.begin(), boundary.end());

  for (const auto& [name, tag] : mesh.regions()) {
    if (tag.name != name) msg.push_back("region '" + name + "' has mismatched name '" + tag.name + "'");
    if (tag.kind == RegionKind::nodes) {
      if (!std::is_sorted(tag.nodes.begin(), tag.nodes.end()) ||
          std::adjacent_find(tag.nodes.begin(), tag.nodes.end()) != tag.nodes.end())
        msg.push_back("region '" + name + "' members are not sorted and unique");
      for (Index v : tag.nodes) {
        if (v < 0 || v >= n) msg.push_back("region '" + name + "' references node " + std::to_string(v) + " out of range");
      }
    } else {
      if (!std::is_sorted(tag.facets.begin(), tag.facets.end()) ||
          std::adjacent_find(tag.facets.begin(), tag.facets.end()) != tag.facets.end())
        msg.push_back("region '" + name + "' members are not sorted and unique");
      for (const auto& f : tag.facets) {
        if (f.element < 0 || f.element >= static_cast<Index>(mesh.element_count()) || f.local < 0 ||
            f.local >= mesh.nodes_per_element()) {
          msg.push_back("region '" + name + "' references facet (" + std::to_string(f.element) + ", " +
                        std::to_string(f.local) + ") that does not exist");
        } else if (!std::binary_search(boundary.begin(), boundary.end(), f)) {
          msg.push_back("region '" + name + "' facet (" + std::to_string(f.element) + ", " + std::to_string(f.local) +
                        ") is not a boundary facet");
        }
      }
    }
  }
  report.is_valid = msg.empty();
  return report;
}

MeshReport measure(const Mesh& mesh) {
  MeshReport report = validate(mesh);
  if (!report.is_valid) {
    std::string text = "invalid mesh:";
    for (const auto& m : report.messages) text += "\n  " + m;
    throw ValidationError(text);
  }
  report.min_quality = std::numeric_limits<double>::infinity();
  double planar = 0.0;
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    report.volume += element_volume(mesh, e);
    planar += std::abs(signed_measure(mesh, e));
    const double q = element_quality(mesh, e);
    if (q < report.min_quality) {
      report.min_quality = q;
      report.worst_element = e;
    }
  }
  for (const auto& f : extract_boundary(mesh)) report.surface_area += f.area;
  if (mesh.dimension() == 2) report.surface_area += 2.0 * planar;
  return report;
}

std::vector<BoundaryFacet> extract_boundary(const Mesh& mesh) {
  const auto incidence = facet_incidence(mesh);
  std::vector<FacetRef> refs;
  for (std::size_t i = 0; i < incidence.size();) {
    std::size_t j = i;
    while (j < incidence.size() && incidence[j].key == incidence[i].key) ++j;
    if (j - i > 2) {
      throw ValidationError("non-manifold facet shared by " + std::to_string(j - i) + " elements, first element " +
                            std::to_string(incidence[i].ref.element));
    }
    if (j - i == 1) refs.push_back(incidence[i].ref);
    i = j;
  }
  std::sort(refs.begin(), refs.end());
  std::vector<BoundaryFacet> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(boundary_facet(mesh, r));
  return out;
}

std::vector<Index> region_nodes(const Mesh& mesh, const std::string& name) {
  const RegionTag& tag = mesh.region(name);
  if (tag.kind == RegionKind::nodes) return tag.nodes;
  std::vector<Index> out;
  for (const auto& f : tag.facets) {
    const auto local = facet_local_nodes(mesh.dimension(), f.local);
    for (int l : local) out.push_back(mesh.element(f.element)[static_cast<std::size_t>(l)]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Index> boundary_nodes(const Mesh& mesh) {
  std::vector<Index> out;
  const int per = mesh.dimension();
  for (const auto& f : extract_boundary(mesh)) {
    for (int i = 0; i < per; ++i) out.push_back(f.nodes[static_cast<std::size_t>(i)]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace tracshape
