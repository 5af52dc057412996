#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "tracshape/errors.hpp"
#include "tracshape/fixtures.hpp"
#include "tracshape/mesh.hpp"

using namespace tracshape;
using namespace tracshape::testing;

namespace {

const char* kReferenceTet = R"({
  "dimension": 3,
  "nodes": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
  "elements": [[0,1,2,3]],
  "regions": {"base": {"kind": "facets", "members": [[0,3]]}, "tip": {"kind": "nodes", "members": [3]}}
})";

Mesh parse(const std::string& text, std::vector<std::string>* warnings = nullptr) {
  std::istringstream in(text);
  return load_mesh(in, warnings);
}

}  // namespace

TEST(LoadMesh, ReferenceTet) {
  const Mesh m = parse(kReferenceTet);
  EXPECT_EQ(m.node_count(), 4u);
  EXPECT_EQ(m.element_count(), 1u);
  EXPECT_NEAR(measure(m).volume, 1.0 / 6.0, 1e-15);
}

TEST(LoadMesh, OutOfRangeIndexNamesElement) {
  const std::string doc = R"({"dimension":3,"nodes":[[0,0,0],[1,0,0],[0,1,0],[0,0,1]],"elements":[[0,1,2,9]]})";
  try {
    parse(doc);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("element 0"), std::string::npos) << e.what();
  }
}

TEST(LoadMesh, MalformedDocumentIsParseError) {
  EXPECT_THROW(parse("{\"dimension\": 3, \"nodes\": ["), ParseError);
  EXPECT_THROW(parse(R"({"dimension":3,"nodes":[],"elements":[],"colour":1})"), ParseError);
  EXPECT_THROW(parse(R"({"dimension":2,"nodes":[],"elements":[]})"), ParseError);  // thickness missing
  EXPECT_THROW(parse(R"({"dimension":3,"thickness":1,"nodes":[],"elements":[]})"), ParseError);
}

TEST(LoadMesh, UnresolvableRegionIsValidationError) {
  const std::string doc = R"({"dimension":3,"nodes":[[0,0,0],[1,0,0],[0,1,0],[0,0,1]],"elements":[[0,1,2,3]],
    "regions":{"bad":{"kind":"facets","members":[[0,7]]}}})";
  EXPECT_THROW(parse(doc), ValidationError);
}

TEST(LoadMesh, RepairsInvertedElementAndRemapsFacets) {
  // Nodes 2 and 3 swapped: negative volume. Facet 3 (base, z = 0) becomes facet 2 after the swap.
  const std::string doc = R"({"dimension":3,"nodes":[[0,0,0],[1,0,0],[0,1,0],[0,0,1]],"elements":[[0,1,3,2]],
    "regions":{"base":{"kind":"facets","members":[[0,2]]}}})";
  std::vector<std::string> warnings;
  const Mesh m = parse(doc, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_GT(signed_measure(m, 0), 0.0);
  const auto facet = boundary_facet(m, m.region("base").facets.at(0));
  EXPECT_NEAR(facet.normal.z(), -1.0, 1e-15);
}

TEST(LoadMesh, PlateWithHoleRoundTripIsBitIdentical) {
  const Mesh a = make_fixture("plate_with_hole2d", {{"n", 4}});
  std::stringstream buf;
  save_mesh(buf, a);
  const Mesh b = load_mesh(buf);
  ASSERT_EQ(a.node_count(), b.node_count());
  for (std::size_t i = 0; i < a.node_count(); ++i) {
    for (int c = 0; c < 3; ++c) EXPECT_EQ(a.nodes()[i][c], b.nodes()[i][c]);
  }
  EXPECT_EQ(a.elements(), b.elements());
  EXPECT_EQ(a.thickness(), b.thickness());
  EXPECT_EQ(mesh_to_json(a), mesh_to_json(b));
}

TEST(Validate, ReferenceTetIsValid) {
  const MeshReport r = validate(reference_tet());
  EXPECT_TRUE(r.is_valid);
  EXPECT_TRUE(r.messages.empty());
}

TEST(Validate, SwappedNodesReportInvertedElement) {
  const Mesh m(3, 1.0, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {{0, 1, 3, 2}}, {});
  const MeshReport r = validate(m);
  EXPECT_FALSE(r.is_valid);
  ASSERT_EQ(r.messages.size(), 1u);
  EXPECT_NE(r.messages[0].find("element 0"), std::string::npos);
  EXPECT_NE(r.messages[0].find("inverted"), std::string::npos);
  EXPECT_THROW(measure(m), ValidationError);
}

TEST(Validate, CoincidentNodesListed) {
  const Mesh m(3, 1.0,
               {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(1, 1, 1),
                Vec3(1, 1, 0)},
               {{0, 1, 2, 3}, {4, 6, 2, 5}}, {});
  const MeshReport r = validate(m);
  EXPECT_FALSE(r.is_valid);
  bool found = false;
  for (const auto& msg : r.messages) found |= msg.find("duplicate nodes 1, 4") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(Validate, OrphanAndRegionProblems) {
  std::map<std::string, RegionTag> regions;
  regions["inner"] = {"inner", RegionKind::facets, {}, {{0, 0}}};
  regions["unsorted"] = {"unsorted", RegionKind::nodes, {2, 1}, {}};
  const Mesh m(3, 1.0, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(5, 5, 5)}, {{0, 1, 2, 3}},
               regions);
  const MeshReport r = validate(m);
  EXPECT_FALSE(r.is_valid);
  EXPECT_EQ(r.messages.size(), 2u);  // orphan node 4 and unsorted members; facet (0,0) is a boundary facet
}

TEST(Measure, UnitCubeOfSixTets) {
  const Mesh cube = unit_cube();
  const MeshReport r = measure(cube);
  EXPECT_NEAR(r.volume, 1.0, 1e-12);
  EXPECT_NEAR(r.surface_area, 6.0, 1e-12);
}

TEST(Measure, RegularTetQualityIsOne) {
  EXPECT_NEAR(measure(regular_tet()).min_quality, 1.0, 1e-9);
  const double s = std::sqrt(3.0);
  const Mesh tri(2, 1.0, {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(1, s, 0)}, {{0, 1, 2, -1}}, {});
  EXPECT_NEAR(measure(tri).min_quality, 1.0, 1e-12);
  EXPECT_LT(measure(reference_tet()).min_quality, 1.0);
}

TEST(Measure, PlateWithHoleConvergesToAnalyticArea) {
  const double L = 0.1, W = 0.05, r = 0.01, t = 0.005;
  const double exact = (L * W - std::numbers::pi * r * r) * t;
  double previous_error = 1.0;
  for (int n : {4, 8, 16, 32}) {
    const Mesh m = make_fixture("plate_with_hole2d", {{"L", L}, {"W", W}, {"r", r}, {"t", t}, {"n", n}});
    const double volume = measure(m).volume;
    // Independent oracle: the hole polygon is the inner ring of nodes; shoelace over it.
    const double hole_area = hole_polygon_area(m);
    EXPECT_NEAR(volume, (L * W - hole_area) * t, 1e-12 * exact);
    const double error = std::abs(volume - exact) / exact;
    EXPECT_LT(error, previous_error);
    previous_error = error;
    if (n == 32) {
      EXPECT_LT(error, 0.02);
    }
  }
}

TEST(Measure, VolumeAdditivity) {
  const Mesh m = make_fixture("lug3d");
  double sum = 0.0;
  for (Index e = 0; e < static_cast<Index>(m.element_count()); ++e) sum += element_volume(m, e);
  EXPECT_NEAR(measure(m).volume, sum, 1e-12 * sum);
}

TEST(Measure, RigidMotionInvariance) {
  std::mt19937 rng(7);
  for (const char* name : {"lug3d", "bar3d"}) {
    const Mesh m = make_fixture(name);
    const Mesh moved = rigidly_moved(m, rng);
    const MeshReport a = measure(m), b = measure(moved);
    EXPECT_NEAR(a.volume, b.volume, 1e-9 * a.volume);
    EXPECT_NEAR(a.surface_area, b.surface_area, 1e-9 * a.surface_area);
    EXPECT_NEAR(a.min_quality, b.min_quality, 1e-9 * a.min_quality);
  }
}

TEST(ExtractBoundary, SingleTetOutwardNormals) {
  const Mesh m = reference_tet();
  const auto facets = extract_boundary(m);
  ASSERT_EQ(facets.size(), 4u);
  const Vec3 centroid = 0.25 * (m.node(0) + m.node(1) + m.node(2) + m.node(3));
  for (const auto& f : facets) {
    const Vec3 face_center = (m.node(f.nodes[0]) + m.node(f.nodes[1]) + m.node(f.nodes[2])) / 3.0;
    EXPECT_GT(f.normal.dot(face_center - centroid), 0.0);
    EXPECT_NEAR(f.normal.norm(), 1.0, 1e-15);
  }
}

TEST(ExtractBoundary, UnitCubeHasTwelveTriangles) {
  const auto facets = extract_boundary(unit_cube());
  EXPECT_EQ(facets.size(), 12u);
  for (std::size_t i = 1; i < facets.size(); ++i) EXPECT_LT(facets[i - 1].ref, facets[i].ref);
}

TEST(ExtractBoundary, GluedTetsMatchEnumerationOracle) {
  const Mesh m(3, 1.0, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1)},
               {{0, 1, 2, 3}, {1, 2, 3, 4}}, {});
  ASSERT_TRUE(validate(m).is_valid) << validate(m).messages.at(0);
  EXPECT_EQ(extract_boundary(m).size(), count_facets_with_incidence(m, 1));
  EXPECT_EQ(extract_boundary(m).size(), 6u);
}

TEST(ExtractBoundary, NonManifoldFacetIsError) {
  const Mesh m(3, 1.0,
               {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1), Vec3(0.3, 0.3, 1)},
               {{0, 1, 2, 3}, {0, 2, 1, 4}, {0, 1, 2, 5}}, {});
  EXPECT_THROW(extract_boundary(m), ValidationError);
}

TEST(ExtractBoundary, BoundaryIsEdgeManifold) {
  for (const char* name : {"bar3d", "lug3d"}) {
    const Mesh m = make_fixture(name);
    std::map<std::pair<Index, Index>, int> edges;
    for (const auto& f : extract_boundary(m)) {
      for (int i = 0; i < 3; ++i) {
        Index a = f.nodes[static_cast<std::size_t>(i)], b = f.nodes[static_cast<std::size_t>((i + 1) % 3)];
        ++edges[{std::min(a, b), std::max(a, b)}];
      }
    }
    for (const auto& [edge, count] : edges) EXPECT_EQ(count, 2) << name;
  }
}

TEST(Fixtures, AllValidWithStandardRegions) {
  for (const auto& name : fixture_names()) {
    const Mesh m = make_fixture(name);
    const MeshReport r = validate(m);
    EXPECT_TRUE(r.is_valid) << name << ": " << (r.messages.empty() ? "" : r.messages[0]);
    for (const char* region : {"load", "pin", "frozen", "design"}) EXPECT_TRUE(m.has_region(region)) << name << region;
    EXPECT_EQ(m.region("load").kind, RegionKind::facets);
    EXPECT_FALSE(m.region("load").facets.empty()) << name;
    EXPECT_FALSE(m.region("design").nodes.empty()) << name;
    // design and frozen are disjoint and cover the boundary
    const auto& design = m.region("design").nodes;
    const auto& frozen = m.region("frozen").nodes;
    std::vector<Index> both;
    std::set_intersection(design.begin(), design.end(), frozen.begin(), frozen.end(), std::back_inserter(both));
    EXPECT_TRUE(both.empty());
    EXPECT_EQ(design.size() + frozen.size(), boundary_nodes(m).size()) << name;
    EXPECT_GT(measure(m).min_quality, 0.05) << name;  // optimizer quality floor
  }
}

TEST(Fixtures, BarVolumeAndEndRegions) {
  const Mesh m = make_fixture("bar3d", {{"L", 1.0}, {"a", 0.1}, {"n", 4}});
  EXPECT_NEAR(measure(m).volume, 0.01, 1e-10);
  for (Index v : region_nodes(m, "pin")) EXPECT_EQ(m.node(v).x(), 0.0);
  for (Index v : region_nodes(m, "load")) EXPECT_EQ(m.node(v).x(), 1.0);
  EXPECT_EQ(region_nodes(m, "pin").size(), 25u);
}

TEST(Fixtures, DegenerateParamsRejected) {
  EXPECT_THROW(make_fixture("plate_with_hole2d", {{"r", 0.0}}), ValidationError);
  EXPECT_THROW(make_fixture("plate_with_hole2d", {{"r", 0.025}}), ValidationError);
  EXPECT_THROW(make_fixture("ring2d", {{"r_in", 0.05}}), ValidationError);
  EXPECT_THROW(make_fixture("bar3d", {{"n", 1.5}}), ValidationError);
  EXPECT_THROW(make_fixture("bar3d", {{"colour", 1}}), ValidationError);
  EXPECT_THROW(make_fixture("sling"), ValidationError);
}

TEST(Fixtures, RingAreaMatchesPolygonOracle) {
  const double ri = 0.02, ro = 0.04, t = 0.005;
  const Mesh m = make_fixture("ring2d", {{"r_in", ri}, {"r_out", ro}, {"t", t}, {"n", 16}});
  const double area = measure(m).volume / t;
  const double polygon = 0.5 * 16 * std::sin(2.0 * std::numbers::pi / 16) * (ro * ro - ri * ri);
  EXPECT_NEAR(area, polygon, 1e-12 * polygon);
  const double annulus = std::numbers::pi * (ro * ro - ri * ri);
  EXPECT_LT(std::abs(area - annulus) / annulus, 0.03);
  EXPECT_LT(area, annulus);
}

TEST(Fixtures, Deterministic) {
  for (const auto& name : fixture_names()) EXPECT_EQ(mesh_to_json(make_fixture(name)), mesh_to_json(make_fixture(name)));
}
