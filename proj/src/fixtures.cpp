#include "tracshape/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "tracshape/errors.hpp"

namespace tracshape {

namespace {

class Params {
 public:
  Params(std::string fixture, const FixtureParams& given, FixtureParams defaults)
      : fixture_(std::move(fixture)), values_(std::move(defaults)) {
    for (const auto& [k, v] : given) {
      if (!values_.count(k)) throw ValidationError("fixture " + fixture_ + " has no parameter '" + k + "'");
      values_[k] = v;
    }
  }

  double real(const std::string& key) const { return values_.at(key); }

  double positive(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError("fixture " + fixture_ + ": parameter " + key + " must be positive");
    return v;
  }

  int count(const std::string& key, int min_value) const {
    const double v = real(key);
    if (v != std::floor(v) || v < min_value || v > 1e6)
      throw ValidationError("fixture " + fixture_ + ": parameter " + key + " must be an integer >= " +
                            std::to_string(min_value));
    return static_cast<int>(v);
  }

  [[noreturn]] void degenerate(const std::string& why) const {
    throw ValidationError("fixture " + fixture_ + ": degenerate parameters, " + why);
  }

 private:
  std::string fixture_;
  FixtureParams values_;
};

using FacetPredicate = std::function<bool(const BoundaryFacet&)>;

void orient(int dim, const std::vector<Vec3>& nodes, std::vector<Element>& elements) {
  const Mesh probe(dim, 1.0, nodes, elements, {});
  for (Index e = 0; e < static_cast<Index>(elements.size()); ++e) {
    if (signed_measure(probe, e) < 0.0) std::swap(elements[static_cast<std::size_t>(e)][static_cast<std::size_t>(dim - 1)],
                                                   elements[static_cast<std::size_t>(e)][static_cast<std::size_t>(dim)]);
  }
}

/// Orients elements and tags the standard regions from facet predicates.
Mesh finish(int dim, double thickness, std::vector<Vec3> nodes, std::vector<Element> elements,
            const FacetPredicate& is_pin, const FacetPredicate& is_load, const FacetPredicate& is_frozen) {
  orient(dim, nodes, elements);
  Mesh bare(dim, thickness, std::move(nodes), std::move(elements), {});
  const auto boundary = extract_boundary(bare);

  RegionTag pin{"pin", RegionKind::facets, {}, {}};
  RegionTag load{"load", RegionKind::facets, {}, {}};
  RegionTag frozen{"frozen", RegionKind::nodes, {}, {}};
  RegionTag design{"design", RegionKind::nodes, {}, {}};
  std::vector<Index> all_boundary;
  for (const auto& f : boundary) {
    const auto count = static_cast<std::size_t>(dim);
    if (is_pin(f)) pin.facets.push_back(f.ref);
    if (is_load(f)) load.facets.push_back(f.ref);
    for (std::size_t i = 0; i < count; ++i) {
      all_boundary.push_back(f.nodes[i]);
      if (is_frozen(f)) frozen.nodes.push_back(f.nodes[i]);
    }
  }
  auto unique_sort = [](std::vector<Index>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  unique_sort(frozen.nodes);
  unique_sort(all_boundary);
  std::set_difference(all_boundary.begin(), all_boundary.end(), frozen.nodes.begin(), frozen.nodes.end(),
                      std::back_inserter(design.nodes));

  std::map<std::string, RegionTag> regions;
  regions.emplace("pin", std::move(pin));
  regions.emplace("load", std::move(load));
  regions.emplace("frozen", std::move(frozen));
  regions.emplace("design", std::move(design));
  return Mesh(dim, thickness, bare.nodes(), bare.elements(), std::move(regions));
}

bool all_nodes(const BoundaryFacet& f, int dim, const std::function<bool(Index)>& pred) {
  for (int i = 0; i < dim; ++i) {
    if (!pred(f.nodes[static_cast<std::size_t>(i)])) return false;
  }
  return true;
}

/// Splits the quad a-b-c-d (counter-clockwise) along its shorter diagonal.
void split_quad(const std::vector<Vec3>& nodes, Index a, Index b, Index c, Index d, std::vector<Element>& out) {
  const double ac = (nodes[static_cast<std::size_t>(a)] - nodes[static_cast<std::size_t>(c)]).squaredNorm();
  const double bd = (nodes[static_cast<std::size_t>(b)] - nodes[static_cast<std::size_t>(d)]).squaredNorm();
  if (ac <= bd) {
    out.push_back({a, b, c, -1});
    out.push_back({a, c, d, -1});
  } else {
    out.push_back({a, b, d, -1});
    out.push_back({b, c, d, -1});
  }
}

struct Section {
  std::vector<Vec3> nodes;
  std::vector<Element> triangles;
  std::vector<char> on_hole;
  std::vector<char> on_outer;
};

/// Rectangle [x0,x1]x[y0,y1] with a circular hole at (cx, cy). Outer points are spaced along eight
/// half edges (n segments each) and joined to the hole by straight rays with nr layers.
Section rectangle_with_hole(double x0, double x1, double y0, double y1, double cx, double cy, double r, int n,
                            int nr) {
  const Vec3 corners[9] = {{x1, cy, 0}, {x1, y1, 0}, {cx, y1, 0}, {x0, y1, 0}, {x0, cy, 0},
                           {x0, y0, 0}, {cx, y0, 0}, {x1, y0, 0}, {x1, cy, 0}};
  const int around = 8 * n;
  Section s;
  s.nodes.reserve(static_cast<std::size_t>(around * (nr + 1)));
  for (int k = 0; k < around; ++k) {
    const int seg = k / n;
    const double frac = static_cast<double>(k % n) / n;
    const Vec3 outer = corners[seg] + frac * (corners[seg + 1] - corners[seg]);
    const double theta = std::atan2(outer.y() - cy, outer.x() - cx);
    const Vec3 hole(cx + r * std::cos(theta), cy + r * std::sin(theta), 0.0);
    for (int j = 0; j <= nr; ++j) {
      s.nodes.push_back(j == nr ? outer : Vec3(hole + (outer - hole) * (static_cast<double>(j) / nr)));
      s.on_hole.push_back(j == 0);
      s.on_outer.push_back(j == nr);
    }
  }
  auto id = [&](int k, int j) { return static_cast<Index>((k % around) * (nr + 1) + j); };
  for (int k = 0; k < around; ++k)
    for (int j = 0; j < nr; ++j) split_quad(s.nodes, id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j), s.triangles);
  return s;
}

Mesh make_bar3d(const FixtureParams& given) {
  const Params p("bar3d", given, {{"L", 1.0}, {"a", 0.1}, {"n", 2}, {"nx", 0}});
  const double length = p.positive("L");
  const double side = p.positive("a");
  const int n = p.count("n", 1);
  int nx = p.count("nx", 0);
  if (nx == 0) nx = std::max(1, static_cast<int>(std::lround(n * length / side)));

  std::vector<Vec3> nodes;
  auto id = [&](int i, int j, int k) { return static_cast<Index>((i * (n + 1) + j) * (n + 1) + k); };
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k)
        nodes.emplace_back(i == nx ? length : length * i / nx, j == n ? side : side * j / n, k == n ? side : side * k / n);

  // Kuhn subdivision: six tets along the main diagonal of each cell, conforming across cells.
  static constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<Element> elements;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (const auto& perm : kPerms) {
          int c[3] = {i, j, k};
          Element tet{};
          tet[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[perm[s]];
            tet[static_cast<std::size_t>(s + 1)] = id(c[0], c[1], c[2]);
          }
          elements.push_back(tet);
        }

  auto at_x = [&](double x) {
    return [&nodes, x](Index v) { return nodes[static_cast<std::size_t>(v)].x() == x; };
  };
  const auto at0 = at_x(0.0);
  const auto atl = at_x(length);
  const Mesh bar =
      finish(3, 1.0, nodes, std::move(elements), [&](const BoundaryFacet& f) { return all_nodes(f, 3, at0); },
             [&](const BoundaryFacet& f) { return all_nodes(f, 3, atl); },
             [&](const BoundaryFacet& f) { return all_nodes(f, 3, at0) || all_nodes(f, 3, atl); });
  // Single nodes for a statically determinate support of the x = 0 face (roller in x on "pin").
  auto regions = bar.regions();
  regions["support_origin"] = RegionTag{"support_origin", RegionKind::nodes, {id(0, 0, 0)}, {}};
  regions["support_y"] = RegionTag{"support_y", RegionKind::nodes, {id(0, n, 0)}, {}};
  return Mesh(3, 1.0, bar.nodes(), bar.elements(), std::move(regions));
}

Mesh make_cantilever2d(const FixtureParams& given) {
  const Params p("cantilever2d", given, {{"L", 1.0}, {"h", 0.05}, {"t", 0.01}, {"n", 4}});
  const double length = p.positive("L");
  const double depth = p.positive("h");
  const double t = p.positive("t");
  const int ny = p.count("n", 1);
  const int nx = std::max(1, static_cast<int>(std::lround(ny * length / depth)));

  std::vector<Vec3> nodes;
  auto id = [&](int i, int j) { return static_cast<Index>(i * (ny + 1) + j); };
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j) nodes.emplace_back(i == nx ? length : length * i / nx, j == ny ? depth : depth * j / ny, 0.0);
  std::vector<Element> elements;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), -1});
      elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1), -1});
    }
  auto at0 = [&](Index v) { return nodes[static_cast<std::size_t>(v)].x() == 0.0; };
  auto atl = [&](Index v) { return nodes[static_cast<std::size_t>(v)].x() == length; };
  return finish(2, t, nodes, std::move(elements), [&](const BoundaryFacet& f) { return all_nodes(f, 2, at0); },
                [&](const BoundaryFacet& f) { return all_nodes(f, 2, atl); },
                [&](const BoundaryFacet& f) { return all_nodes(f, 2, at0) || all_nodes(f, 2, atl); });
}

Mesh make_plate_with_hole2d(const FixtureParams& given) {
  const Params p("plate_with_hole2d", given, {{"L", 0.1}, {"W", 0.05}, {"r", 0.01}, {"t", 0.005}, {"n", 8}});
  const double length = p.positive("L");
  const double width = p.positive("W");
  const double t = p.positive("t");
  const int n = p.count("n", 1);
  const double r = p.real("r");
  if (!(r > 0.0)) p.degenerate("hole radius must be positive");
  if (r >= 0.5 * width || r >= 0.5 * length) p.degenerate("hole radius must be below half the width");

  Section s = rectangle_with_hole(0.0, length, 0.0, width, 0.5 * length, 0.5 * width, r, n, n);
  const auto& nodes = s.nodes;
  auto outer = [&](Index v) { return s.on_outer[static_cast<std::size_t>(v)] != 0; };
  auto at0 = [&](Index v) { return outer(v) && nodes[static_cast<std::size_t>(v)].x() == 0.0; };
  auto atl = [&](Index v) { return outer(v) && nodes[static_cast<std::size_t>(v)].x() == length; };
  return finish(2, t, s.nodes, std::move(s.triangles), [&](const BoundaryFacet& f) { return all_nodes(f, 2, at0); },
                [&](const BoundaryFacet& f) { return all_nodes(f, 2, atl); },
                [&](const BoundaryFacet& f) { return all_nodes(f, 2, outer); });
}

Mesh make_ring2d(const FixtureParams& given) {
  const Params p("ring2d", given, {{"r_in", 0.02}, {"r_out", 0.04}, {"t", 0.005}, {"n", 16}});
  const double r_in = p.positive("r_in");
  const double r_out = p.positive("r_out");
  const double t = p.positive("t");
  const int n = p.count("n", 3);
  if (r_in >= r_out) p.degenerate("r_in must be smaller than r_out");
  const int nr = std::max(1, n / 8);

  std::vector<Vec3> nodes;
  for (int k = 0; k < n; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n;
    for (int j = 0; j <= nr; ++j) {
      const double rad = j == nr ? r_out : r_in + (r_out - r_in) * j / nr;
      nodes.emplace_back(rad * std::cos(theta), rad * std::sin(theta), 0.0);
    }
  }
  auto id = [&](int k, int j) { return static_cast<Index>((k % n) * (nr + 1) + j); };
  std::vector<Element> elements;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < nr; ++j) split_quad(nodes, id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j), elements);
  auto inner = [&](Index v) { return v % (nr + 1) == 0; };
  auto outer = [&](Index v) { return v % (nr + 1) == nr; };
  return finish(2, t, nodes, std::move(elements), [&](const BoundaryFacet& f) { return all_nodes(f, 2, inner); },
                [&](const BoundaryFacet& f) { return all_nodes(f, 2, outer); },
                [&](const BoundaryFacet& f) { return all_nodes(f, 2, inner); });
}

Mesh make_lug3d(const FixtureParams& given) {
  const Params p("lug3d", given,
                 {{"L", 0.12}, {"W", 0.06}, {"T", 0.02}, {"r", 0.015}, {"n", 4}, {"nz", 3}});
  const double length = p.positive("L");
  const double width = p.positive("W");
  const double thick = p.positive("T");
  const double r = p.real("r");
  const int n = p.count("n", 1);
  const int nz = p.count("nz", 1);
  if (length < width) p.degenerate("L must be at least W so the eye fits in the head");
  if (!(r > 0.0) || r >= 0.5 * width) p.degenerate("hole radius must lie in (0, W/2)");

  const double cx = length - 0.5 * width;
  const Section s = rectangle_with_hole(0.0, length, 0.0, width, cx, 0.5 * width, r, n, n);
  const auto planar = static_cast<Index>(s.nodes.size());

  std::vector<Vec3> nodes;
  for (int layer = 0; layer <= nz; ++layer) {
    const double z = layer == nz ? thick : thick * layer / nz;
    for (const Vec3& q : s.nodes) nodes.emplace_back(q.x(), q.y(), z);
  }
  // Prism split keyed on planar ids: each side quad takes the diagonal from the lower-id bottom
  // vertex to the higher-id top vertex, so neighbouring prisms agree.
  std::vector<Element> elements;
  for (int layer = 0; layer < nz; ++layer) {
    const Index bot = layer * planar;
    const Index top = (layer + 1) * planar;
    for (const Element& tri : s.triangles) {
      std::array<Index, 3> v{tri[0], tri[1], tri[2]};
      std::sort(v.begin(), v.end());
      const Index a = v[0], b = v[1], c = v[2];
      elements.push_back({bot + a, bot + b, bot + c, top + c});
      elements.push_back({bot + a, bot + b, top + b, top + c});
      elements.push_back({bot + a, top + a, top + b, top + c});
    }
  }

  auto hole = [&](Index v) { return s.on_hole[static_cast<std::size_t>(v % planar)] != 0; };
  auto at0 = [&](Index v) {
    return s.on_outer[static_cast<std::size_t>(v % planar)] && nodes[static_cast<std::size_t>(v)].x() == 0.0;
  };
  auto is_hole = [&](const BoundaryFacet& f) { return all_nodes(f, 3, hole); };
  auto is_pin = [&](const BoundaryFacet& f) { return all_nodes(f, 3, at0); };
  auto is_load = [&](const BoundaryFacet& f) {
    if (!is_hole(f)) return false;
    double x = 0.0;
    for (Index v : f.nodes) x += nodes[static_cast<std::size_t>(v)].x();
    return x / 3.0 > cx;
  };
  return finish(3, 1.0, nodes, std::move(elements), is_pin, is_load,
                [&](const BoundaryFacet& f) { return is_hole(f) || is_pin(f); });
}

}  // namespace

Mesh make_fixture(const std::string& name, const FixtureParams& params) {
  if (name == "bar3d") return make_bar3d(params);
  if (name == "cantilever2d") return make_cantilever2d(params);
  if (name == "plate_with_hole2d") return make_plate_with_hole2d(params);
  if (name == "ring2d") return make_ring2d(params);
  if (name == "lug3d") return make_lug3d(params);
  throw ValidationError("unknown fixture '" + name + "'");
}

std::vector<std::string> fixture_names() {
  return {"bar3d", "cantilever2d", "plate_with_hole2d", "ring2d", "lug3d"};
}

}  // namespace tracshape
