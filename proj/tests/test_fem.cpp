#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "test_support.hpp"
#include "tracshape/errors.hpp"
#include "tracshape/fem.hpp"
#include "tracshape/fixtures.hpp"

using namespace tracshape;
using namespace tracshape::testing;

namespace {

// ---- independent oracle: barycentric gradients + Voigt B + quadrature --------------------------

/// Rows of the inverse of [1 x_a] are the linear shape functions' coefficients.
Eigen::MatrixXd shape_gradients(const std::vector<Vec3>& x, int dim) {
  const int n = dim + 1;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    for (int k = 0; k < dim; ++k) a(i, k + 1) = x[static_cast<std::size_t>(i)][k];
  }
  const Eigen::MatrixXd inv = a.inverse();
  return inv.bottomRows(dim);  // dim x n: dN_a/dx_k
}

Eigen::MatrixXd voigt_b(const Eigen::MatrixXd& g, int dim) {
  const int n = dim + 1;
  if (dim == 2) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 2 * n);
    for (int a = 0; a < n; ++a) {
      b(0, 2 * a) = g(0, a);
      b(1, 2 * a + 1) = g(1, a);
      b(2, 2 * a) = g(1, a);
      b(2, 2 * a + 1) = g(0, a);
    }
    return b;
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 3 * n);
  for (int a = 0; a < n; ++a) {
    for (int k = 0; k < 3; ++k) b(k, 3 * a + k) = g(k, a);
    b(3, 3 * a + 1) = g(2, a);
    b(3, 3 * a + 2) = g(1, a);
    b(4, 3 * a + 0) = g(2, a);
    b(4, 3 * a + 2) = g(0, a);
    b(5, 3 * a + 0) = g(1, a);
    b(5, 3 * a + 1) = g(0, a);
  }
  return b;
}

Eigen::MatrixXd voigt_d(double E, double nu, int dim) {
  if (dim == 2) {
    Eigen::MatrixXd d(3, 3);
    d << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
    return d * (E / (1 - nu * nu));
  }
  const double c = E / ((1 + nu) * (1 - 2 * nu));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d(i, j) = c * (i == j ? 1 - nu : nu);
  for (int i = 3; i < 6; ++i) d(i, i) = c * (1 - 2 * nu) / 2;
  return d;
}

/// Integrates B^T D B with a 4-point (tet) or 3-point (tri) Gauss rule; the integrand is constant for P1 but
/// the oracle evaluates B at each point independently.
Eigen::MatrixXd quadrature_stiffness(const std::vector<Vec3>& x, double E, double nu, int dim, double thickness) {
  const Eigen::MatrixXd d = voigt_d(E, nu, dim);
  double measure = 0.0;
  if (dim == 3) {
    measure = std::abs((x[1] - x[0]).dot((x[2] - x[0]).cross(x[3] - x[0]))) / 6.0;
  } else {
    measure = 0.5 * std::abs((x[1] - x[0]).cross(x[2] - x[0]).z()) * thickness;
  }
  const int points = dim == 3 ? 4 : 3;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero((dim + 1) * dim, (dim + 1) * dim);
  for (int q = 0; q < points; ++q) {
    const Eigen::MatrixXd b = voigt_b(shape_gradients(x, dim), dim);
    k += (measure / points) * b.transpose() * d * b;
  }
  return k;
}

std::vector<Vec3> coords_of(const Mesh& m, Index e) {
  std::vector<Vec3> x;
  for (Index v : m.element_nodes(e)) x.push_back(m.node(v));
  return x;
}

Eigen::MatrixXd dense_assembly(const Mesh& m, double E, double nu) {
  const int dim = m.dimension();
  const int n = static_cast<int>(m.dof_count());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Index e = 0; e < static_cast<Index>(m.element_count()); ++e) {
    const auto nodes = m.element_nodes(e);
    const Eigen::MatrixXd ke = quadrature_stiffness(coords_of(m, e), E, nu, dim, m.thickness());
    for (int a = 0; a <= dim; ++a)
      for (int b = 0; b <= dim; ++b)
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j)
            k(nodes[static_cast<std::size_t>(a)] * dim + i, nodes[static_cast<std::size_t>(b)] * dim + j) +=
                ke(a * dim + i, b * dim + j);
  }
  return k;
}

Material material(double E, double nu) {
  Material m;
  m.youngs_modulus = E;
  m.poisson_ratio = nu;
  return m;
}

LoadCase clamped_with_force(const Vec3& force) {
  LoadCase lc;
  lc.dirichlet.push_back({"pin", {true, true, true}, Vec3::Zero()});
  lc.neumann.push_back({"load", NeumannKind::total_force, force, 0.0});
  return lc;
}

double mean_component(const Mesh& m, const Vector& u, const std::string& region, int comp) {
  const auto nodes = region_nodes(m, region);
  double sum = 0.0;
  for (Index v : nodes) sum += u(v * m.dimension() + comp);
  return sum / static_cast<double>(nodes.size());
}

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

// ---- element_stiffness -----------------------------------------------------------------------

TEST(ElementStiffness, ReferenceTetMatchesQuadratureOracle) {
  const std::vector<Vec3> x = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const Eigen::MatrixXd k = element_stiffness(x, material(1.0, 0.0), ElasticModel::solid, 1.0);
  const Eigen::MatrixXd oracle = quadrature_stiffness(x, 1.0, 0.0, 3, 1.0);
  EXPECT_LE((k - oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ElementStiffness, GeneralElementsMatchOracle) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const std::vector<Vec3> tet = {Vec3(u(rng), u(rng), u(rng)), Vec3(1 + u(rng), u(rng), u(rng)),
                                 Vec3(u(rng), 1 + u(rng), u(rng)), Vec3(u(rng), u(rng), 1 + u(rng))};
  const Eigen::MatrixXd k3 = element_stiffness(tet, material(2e11, 0.25), ElasticModel::solid, 1.0);
  EXPECT_LE((k3 - quadrature_stiffness(tet, 2e11, 0.25, 3, 1.0)).norm(), 1e-12 * k3.norm());
  const std::vector<Vec3> tri = {Vec3(0.1, 0.0, 0), Vec3(1.2, 0.3, 0), Vec3(0.4, 0.9, 0)};
  const Eigen::MatrixXd k2 = element_stiffness(tri, material(2e11, 0.3), ElasticModel::plane_stress, 0.01);
  EXPECT_LE((k2 - quadrature_stiffness(tri, 2e11, 0.3, 2, 0.01)).norm(), 1e-12 * k2.norm());
}

TEST(ElementStiffness, SymmetricWithRigidNullspace) {
  const std::vector<Vec3> tet = {Vec3(0, 0, 0), Vec3(1, 0.1, 0), Vec3(0.2, 1, 0), Vec3(0.1, 0.3, 1)};
  const std::vector<Vec3> tri = {Vec3(0, 0, 0), Vec3(1, 0.1, 0), Vec3(0.2, 1, 0)};
  for (int dim : {2, 3}) {
    const Eigen::MatrixXd k = dim == 3 ? element_stiffness(tet, material(2e11, 0.25), ElasticModel::solid, 1.0)
                                       : element_stiffness(tri, material(2e11, 0.25), ElasticModel::plane_stress, 0.1);
    EXPECT_EQ((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
    for (int c = 0; c < dim; ++c) {
      Eigen::VectorXd t = Eigen::VectorXd::Zero(k.rows());
      for (int a = 0; a <= dim; ++a) t(a * dim + c) = 1.0;
      EXPECT_LE((k * t).norm(), 1e-9 * k.norm());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    const double top = eig.eigenvalues().maxCoeff();
    const int zeros = static_cast<int>((eig.eigenvalues().array().abs() < 1e-10 * top).count());
    EXPECT_EQ(zeros, dim == 3 ? 6 : 3);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10 * top);
  }
}

TEST(ElementStiffness, DegenerateElementThrows) {
  const std::vector<Vec3> flat = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  EXPECT_THROW(element_stiffness(flat, material(1, 0), ElasticModel::solid, 1.0), SolveError);
}

// ---- assemble --------------------------------------------------------------------------------

TEST(Assemble, SingleTetEqualsElementMatrix) {
  const Mesh m = reference_tet();
  const Eigen::MatrixXd k(assemble(m, material(1.0, 0.0)));
  EXPECT_LE((k - quadrature_stiffness(coords_of(m, 0), 1.0, 0.0, 3, 1.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Assemble, DisjointTetsAreBlockDiagonal) {
  const Mesh m(3, 1.0,
               {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(5, 0, 0), Vec3(6, 0, 0), Vec3(5, 1, 0),
                Vec3(5, 0, 1)},
               {{0, 1, 2, 3}, {4, 5, 6, 7}}, {});
  const Eigen::MatrixXd k(assemble(m, material(2e11, 0.25)));
  EXPECT_EQ(k.block(0, 12, 12, 12).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(k.block(12, 0, 12, 12).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Assemble, BarMatchesDenseOracle) {
  const Mesh m = make_fixture("bar3d", {{"n", 2}});
  const SparseMatrix k = assemble(m, material(2e11, 0.25));
  const Eigen::MatrixXd dense = dense_assembly(m, 2e11, 0.25);
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd v(k.cols());
    for (auto& x : v) x = g(rng);
    const Eigen::VectorXd a = k * v, b = dense * v;
    EXPECT_LE((a - b).norm(), 1e-12 * b.norm());
  }
}

TEST(Assemble, Deterministic) {
  const Mesh m = make_fixture("lug3d");
  const SparseMatrix a = assemble(m, Material{}), b = assemble(m, Material{});
  ASSERT_EQ(a.nonZeros(), b.nonZeros());
  for (Eigen::Index i = 0; i < a.nonZeros(); ++i) EXPECT_EQ(a.valuePtr()[i], b.valuePtr()[i]);
}

// ---- solve_static ----------------------------------------------------------------------------

TEST(SolveStatic, ZeroLoadGivesZeroDisplacement) {
  const Mesh m = make_fixture("bar3d");
  const Solution s = solve_static(m, Material{}, clamped_with_force(Vec3::Zero()));
  EXPECT_EQ(s.displacement.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.compliance, 0.0);
}

TEST(SolveStatic, BarAxialMatchesClosedForm) {
  const Mesh m = make_fixture("bar3d", {{"n", 4}});
  const double expected = 110e3 * 1.0 / (2e11 * 0.01);
  ASSERT_NEAR(expected, 5.5e-5, 1e-18);
  const Solution steel = solve_static(m, Material::paper_steel(), clamped_with_force(Vec3(110e3, 0, 0)));
  EXPECT_LE(relative(mean_component(m, steel.displacement, "load", 0), expected), 0.01);
  const Solution nu0 = solve_static(m, material(2e11, 0.0), clamped_with_force(Vec3(110e3, 0, 0)));
  for (Index v : region_nodes(m, "load")) EXPECT_LE(relative(nu0.displacement(3 * v), expected), 1e-9);
}

TEST(SolveStatic, CantileverApproachesBeamTheory) {
  const double L = 1.0, h = 0.05, t = 0.01, P = 100.0, E = 2e11, nu = 0.25;
  const double I = t * h * h * h / 12.0;
  const double G = E / (2.0 * (1.0 + nu));
  const double beam = P * L * L * L / (3.0 * E * I) + P * L / (5.0 / 6.0 * G * h * t);
  double previous = 1.0;
  for (int n : {4, 8, 16, 32}) {
    const Mesh m = make_fixture("cantilever2d", {{"L", L}, {"h", h}, {"t", t}, {"n", n}});
    const Solution s = solve_static(m, material(E, nu), clamped_with_force(Vec3(0, -P, 0)));
    const double tip = -mean_component(m, s.displacement, "load", 1);
    const double error = relative(tip, beam);
    EXPECT_LT(error, previous) << "n=" << n;
    previous = error;
    if (n == 32) {
      EXPECT_LE(error, 0.10);
    }
  }
}

TEST(SolveStatic, ResidualWithinTolerance) {
  const Mesh m = make_fixture("lug3d");
  LoadCase lc;
  lc.dirichlet.push_back({"pin", {true, true, true}, Vec3::Zero()});
  lc.neumann.push_back({"load", NeumannKind::pressure, Vec3::Zero(), -5e7});
  for (SolverMethod method : {SolverMethod::direct, SolverMethod::conjugate_gradient}) {
    SolverOptions opts;
    opts.method = method;
    const ElasticSystem sys(m, Material{}, lc, opts);
    const Vector u = sys.solve_displacement();
    Vector r = sys.stiffness() * u - sys.load();
    for (Index d : sys.constraints().dofs) r(d) = 0.0;
    Vector f = sys.load();
    for (Index d : sys.constraints().dofs) f(d) = 0.0;
    EXPECT_LE(r.norm(), 1e-10 * f.norm());
  }
}

TEST(SolveStatic, DirectAndIterativeAgree) {
  const Mesh m = make_fixture("plate_with_hole2d");
  LoadCase lc;
  lc.dirichlet.push_back({"pin", {true, true, false}, Vec3::Zero()});
  lc.neumann.push_back({"load", NeumannKind::total_force, Vec3(1e4, 0, 0), 0.0});
  SolverOptions direct, cg;
  direct.method = SolverMethod::direct;
  cg.method = SolverMethod::conjugate_gradient;
  const Solution a = solve_static(m, Material{}, lc, direct), b = solve_static(m, Material{}, lc, cg);
  EXPECT_LE((a.displacement - b.displacement).norm(), 1e-8 * a.displacement.norm());
}

TEST(SolveStatic, SingularSystemNamesFreeMode) {
  const Mesh m = make_fixture("bar3d");
  LoadCase lc = clamped_with_force(Vec3(1, 0, 0));
  lc.dirichlet[0].fixed = {true, true, false};
  try {
    solve_static(m, Material{}, lc);
    FAIL() << "expected a singular system";
  } catch (const SolveError& e) {
    EXPECT_NE(std::string(e.what()).find("translation z"), std::string::npos) << e.what();
  }
  // Pinning a single line of nodes leaves rotation about that line free.
  std::vector<Index> dofs;
  for (Index v = 0; v < static_cast<Index>(m.node_count()); ++v) {
    if (m.node(v).y() == 0.0 && m.node(v).z() == 0.0) {
      for (int c = 0; c < 3; ++c) dofs.push_back(3 * v + c);
    }
  }
  DofConstraints line{dofs, std::vector<double>(dofs.size(), 0.0)};
  try {
    check_rigid_modes(m, line);
    FAIL() << "expected a singular system";
  } catch (const SolveError& e) {
    EXPECT_NE(std::string(e.what()).find("rotation about x"), std::string::npos) << e.what();
  }
}

TEST(SolveStatic, UnknownRegionRejected) {
  const Mesh m = make_fixture("bar3d");
  LoadCase lc = clamped_with_force(Vec3(1, 0, 0));
  lc.neumann[0].region = "nowhere";
  EXPECT_THROW(solve_static(m, Material{}, lc), ValidationError);
  lc.neumann[0].region = "frozen";  // node set, not facets
  EXPECT_THROW(solve_static(m, Material{}, lc), ValidationError);
}

// ---- von Mises and evaluate ------------------------------------------------------------------

TEST(VonMises, Identities) {
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  s(0, 0) = 125e6;
  EXPECT_EQ(von_mises(s), 125e6);
  const double hydro = 3e8;
  EXPECT_LE(von_mises(hydro * Eigen::Matrix3d::Identity()), 1e-9 * hydro);
  const double tau = 4e7;
  s.setZero();
  s(0, 1) = s(1, 0) = tau;
  EXPECT_LE(relative(von_mises(s), std::sqrt(3.0) * tau), 1e-12);
}

TEST(Evaluate, UniformFieldGivesRatioForEveryP) {
  const Mesh m = make_fixture("ring2d");
  const Vector vm = Vector::Constant(static_cast<Eigen::Index>(m.element_count()), 90e6);
  for (double p : {2.0, 8.0, 64.0}) EXPECT_NEAR(stress_aggregate(m, vm, p, 150e6), 0.6, 1e-14);
}

TEST(Evaluate, TwoElementOracle) {
  const Mesh m(2, 1.0, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)}, {{0, 1, 2, -1}, {0, 2, 3, -1}},
               {});
  Vector vm(2);
  vm << 100e6, 200e6;
  const double oracle = std::pow((std::pow(0.5, 8) + 1.0) / 2.0, 1.0 / 8.0);
  EXPECT_NEAR(stress_aggregate(m, vm, 8.0, 200e6), oracle, 1e-15);
  EXPECT_THROW(stress_aggregate(m, vm, 8.0, 0.0), ValidationError);
  EXPECT_THROW(stress_aggregate(m, vm, 1.0, 1.0), ValidationError);
}

TEST(Evaluate, HighExponentTracksMaximum) {
  const Mesh m = make_fixture("plate_with_hole2d");
  LoadCase lc;
  lc.dirichlet.push_back({"pin", {true, true, false}, Vec3::Zero()});
  lc.neumann.push_back({"load", NeumannKind::total_force, Vec3(1e4, 0, 0), 0.0});
  const Solution s = solve_static(m, Material{}, lc);
  const double ref = 150e6;
  const Response r = evaluate(m, s, 64.0, ref);
  // The peak element alone bounds the aggregate from below.
  Eigen::Index peak = 0;
  s.von_mises.maxCoeff(&peak);
  const double fraction = element_volume(m, static_cast<Index>(peak)) / measure(m).volume;
  EXPECT_GE(r.aggregate, std::pow(fraction, 1.0 / 64.0) * r.max_vm / ref * (1 - 1e-12));
  EXPECT_LE(r.aggregate, r.max_vm / ref);
  EXPECT_DOUBLE_EQ(r.compliance, s.compliance);
  EXPECT_LE(evaluate(m, s, 8.0, ref).aggregate, r.aggregate);
  double gap = 1.0;
  for (double p : {8.0, 64.0, 512.0, 4096.0}) {
    const double next = relative(evaluate(m, s, p, ref).aggregate * ref, r.max_vm);
    EXPECT_LT(next, gap);
    gap = next;
  }
  EXPECT_LE(gap, 0.005);
}

// ---- properties ------------------------------------------------------------------------------

namespace {

/// Uniform strain imposed on every boundary node; interior nodes free, no loads.
void expect_patch_test(const Mesh& m, const Eigen::Matrix3d& strain, const Material& mat) {
  const int dim = m.dimension();
  DofConstraints c;
  for (Index v : boundary_nodes(m)) {
    const Vec3 u = strain * m.node(v);
    for (int k = 0; k < dim; ++k) {
      c.dofs.push_back(v * dim + k);
      c.values.push_back(u(k));
    }
  }
  const ElasticSystem sys(m, mat, Vector::Zero(static_cast<Eigen::Index>(m.dof_count())), c);
  const Solution s = sys.solve();
  // Expected stress from the oracle D.
  Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
  if (dim == 3) {
    Eigen::VectorXd eps(6);
    eps << strain(0, 0), strain(1, 1), strain(2, 2), 2 * strain(1, 2), 2 * strain(0, 2), 2 * strain(0, 1);
    const Eigen::VectorXd sig = voigt_d(mat.youngs_modulus, mat.poisson_ratio, 3) * eps;
    expected << sig(0), sig(5), sig(4), sig(5), sig(1), sig(3), sig(4), sig(3), sig(2);
  } else {
    Eigen::VectorXd eps(3);
    eps << strain(0, 0), strain(1, 1), 2 * strain(0, 1);
    const Eigen::VectorXd sig = voigt_d(mat.youngs_modulus, mat.poisson_ratio, 2) * eps;
    expected.topLeftCorner<2, 2>() << sig(0), sig(2), sig(2), sig(1);
  }
  for (std::size_t e = 0; e < m.element_count(); ++e) {
    EXPECT_LE((s.stress[e] - expected).norm(), 1e-8 * expected.norm()) << "element " << e;
  }
}

}  // namespace

TEST(Properties, PatchTestTet4) {
  Eigen::Matrix3d strain;
  strain << 1e-3, 2e-4, -3e-4, 2e-4, -5e-4, 1e-4, -3e-4, 1e-4, 7e-4;
  expect_patch_test(make_fixture("lug3d"), strain, Material{});
  expect_patch_test(make_fixture("bar3d", {{"n", 3}}), strain, material(1e9, 0.45));
}

TEST(Properties, PatchTestTri3) {
  Eigen::Matrix3d strain = Eigen::Matrix3d::Zero();
  strain.topLeftCorner<2, 2>() << 1e-3, -4e-4, -4e-4, 3e-4;
  expect_patch_test(make_fixture("plate_with_hole2d"), strain, Material{});
  expect_patch_test(make_fixture("ring2d"), strain, material(7e10, 0.33));
}

TEST(Properties, Linearity) {
  const Mesh m = make_fixture("lug3d");
  const Solution base = solve_static(m, Material{}, clamped_with_force(Vec3(0, -5e4, 1e4)));
  for (double alpha : {2.0, -1.0}) {
    const Solution s = solve_static(m, Material{}, clamped_with_force(alpha * Vec3(0, -5e4, 1e4)));
    EXPECT_LE((s.displacement - alpha * base.displacement).norm(), 1e-9 * std::abs(alpha) * base.displacement.norm());
    EXPECT_LE(relative(s.compliance, alpha * alpha * base.compliance), 1e-9);
  }
}

TEST(Properties, ScalingWithYoungsModulus) {
  const Mesh m = make_fixture("plate_with_hole2d");
  const LoadCase lc = clamped_with_force(Vec3(2e4, 1e3, 0));
  const Solution a = solve_static(m, material(2e11, 0.25), lc);
  const Solution b = solve_static(m, material(4e11, 0.25), lc);
  EXPECT_LE((b.displacement - 0.5 * a.displacement).norm(), 1e-9 * a.displacement.norm());
  EXPECT_LE(relative(b.compliance, 0.5 * a.compliance), 1e-9);
  EXPECT_LE((b.von_mises - a.von_mises).norm(), 1e-9 * a.von_mises.norm());
}

TEST(Properties, EquilibriumOfReactions) {
  for (const char* name : {"lug3d", "cantilever2d", "ring2d"}) {
    const Mesh m = make_fixture(name);
    LoadCase lc;
    lc.dirichlet.push_back({"pin", {true, true, true}, Vec3::Zero()});
    lc.neumann.push_back({"load", NeumannKind::pressure, Vec3::Zero(), 2e6});
    lc.neumann.push_back({"load", NeumannKind::total_force, Vec3(3e3, -1e3, m.dimension() == 3 ? 5e2 : 0.0), 0.0});
    const ElasticSystem sys(m, Material{}, lc);
    const Solution s = sys.solve();
    Vec3 applied = Vec3::Zero();
    for (Index v = 0; v < static_cast<Index>(m.node_count()); ++v)
      for (int k = 0; k < m.dimension(); ++k) applied(k) += sys.load()(v * m.dimension() + k);
    EXPECT_LE((s.reaction + applied).norm(), 1e-8 * applied.norm()) << name;
    EXPECT_TRUE(s.displacement.allFinite());
    EXPECT_GE(s.von_mises.minCoeff(), 0.0);
  }
}

TEST(Properties, PressureOnClosedSurfaceHasZeroResultant) {
  const Mesh m = make_fixture("ring2d");
  LoadCase lc;
  lc.neumann.push_back({"pin", NeumannKind::pressure, Vec3::Zero(), 1e6});
  const Vector f = load_vector(m, lc);
  Vec3 total = Vec3::Zero();
  for (Index v = 0; v < static_cast<Index>(m.node_count()); ++v) total.head<2>() += f.segment<2>(2 * v);
  EXPECT_LE(total.norm(), 1e-9 * f.cwiseAbs().sum());
  // Positive pressure acts along the outward normal: on the inner hole it pulls toward the center.
  const Vec3 c(0, 0, 0);
  for (Index v : region_nodes(m, "pin")) EXPECT_LT(f.segment<2>(2 * v).dot((m.node(v) - c).head<2>()), 0.0);
}

TEST(Properties, FrameIndifferenceOfVonMises) {
  const Mesh m = make_fixture("lug3d");
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, -1).normalized()).toRotationMatrix();
  std::vector<Vec3> moved;
  for (const Vec3& x : m.nodes()) moved.push_back(rot * x + Vec3(0.3, -1.0, 2.0));
  const Mesh r = m.with_nodes(moved);
  const Vec3 force(1e4, -4e4, 2e3);
  const Solution a = solve_static(m, Material{}, clamped_with_force(force));
  const Solution b = solve_static(r, Material{}, clamped_with_force(rot * force));
  EXPECT_LE((a.von_mises - b.von_mises).cwiseAbs().maxCoeff(), 1e-8 * a.von_mises.maxCoeff());
}

TEST(Properties, DeterministicSolution) {
  const Mesh m = make_fixture("lug3d");
  const Solution a = solve_static(m, Material{}, clamped_with_force(Vec3(0, 1e4, 0)));
  const Solution b = solve_static(m, Material{}, clamped_with_force(Vec3(0, 1e4, 0)));
  for (Eigen::Index i = 0; i < a.displacement.size(); ++i) ASSERT_EQ(a.displacement(i), b.displacement(i));
  EXPECT_EQ(a.compliance, b.compliance);
}
