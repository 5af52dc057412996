// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the number of failures.
// usage: tracshape_acceptance [configs dir] [scratch dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "tracshape/fem.hpp"
#include "tracshape/fixtures.hpp"
#include "tracshape/format.hpp"
#include "tracshape/pipeline.hpp"
#include "tracshape/sensitivity.hpp"
#include "tracshape/stl.hpp"

#ifndef TRACSHAPE_CONFIG_DIR
#define TRACSHAPE_CONFIG_DIR "configs"
#endif

using namespace tracshape;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kPatchTol = 1e-8;
constexpr double kBarTol = 0.01;
constexpr double kCantileverTol = 0.10;
constexpr double kVonMisesTol = 1e-9;
constexpr double kFdVolume = 1e-6, kFdCompliance = 1e-5, kFdAggregate = 1e-4;
constexpr int kFdDirections = 20;
constexpr double kLugVolumeRatio = 0.85, kLugStressFactor = 1.02;
constexpr double kPlateStressRatio = 0.8;
constexpr double kGaussTol = 1e-10, kVolumeTol = 1e-9;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += " (over the " + format_significant(budget_s, 3) + " s budget)";
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string num(double v) { return format_significant(v, 4); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

LoadCase clamped(const Vec3& force) {
  LoadCase lc;
  lc.dirichlet.push_back({"pin", {true, true, true}, Vec3::Zero()});
  lc.neumann.push_back({"load", NeumannKind::total_force, force, 0.0});
  return lc;
}

double mean_load_displacement(const Mesh& m, const Vector& u, int component) {
  const auto nodes = region_nodes(m, "load");
  double sum = 0.0;
  for (Index v : nodes) sum += u(v * m.dimension() + component);
  return sum / static_cast<double>(nodes.size());
}

// ---- 1 -----------------------------------------------------------------------------------------

/// Hooke's law written out directly: solid, or plane stress in the xy plane.
Eigen::Matrix3d hooke(const Eigen::Matrix3d& eps, double E, double nu, bool plane) {
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  if (plane) {
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    const double c = E / (1 - nu * nu);
    s(0, 0) = c * (eps(0, 0) + nu * eps(1, 1));
    s(1, 1) = c * (eps(1, 1) + nu * eps(0, 0));
    s(0, 1) = s(1, 0) = E / (1 + nu) * eps(0, 1);
    return s;
  }
  const double lambda = E * nu / ((1 + nu) * (1 - 2 * nu)), mu = E / (2 * (1 + nu));
  return lambda * eps.trace() * I + 2 * mu * eps;
}

double patch_error(const Mesh& m, const Eigen::Matrix3d& strain, const Material& mat) {
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
  const Eigen::Matrix3d expected = hooke(strain, mat.youngs_modulus, mat.poisson_ratio, dim == 2);
  double worst = 0.0;
  for (const auto& st : s.stress) worst = std::max(worst, (st - expected).norm() / expected.norm());
  return worst;
}

Outcome patch_test() {
  Eigen::Matrix3d e3;
  e3 << 1e-3, 2e-4, -3e-4, 2e-4, -5e-4, 1e-4, -3e-4, 1e-4, 7e-4;
  Eigen::Matrix3d e2 = Eigen::Matrix3d::Zero();
  e2.topLeftCorner<2, 2>() << 1e-3, -4e-4, -4e-4, 3e-4;
  const double tet = patch_error(make_fixture("lug3d"), e3, Material{});
  const double tri = patch_error(make_fixture("plate_with_hole2d"), e2, Material{});
  return {tet <= kPatchTol && tri <= kPatchTol, "tet4 " + num(tet) + ", tri3 " + num(tri) + " (tol 1e-8)"};
}

// ---- 2 -----------------------------------------------------------------------------------------

Outcome analytic_statics() {
  const Material steel = Material::paper_steel();
  const double F = 110e3, L = 1.0, A = 0.01;
  const double fl_ea = F * L / (steel.youngs_modulus * A);
  const Mesh bar = make_fixture("bar3d", {{"n", 4}});
  const Solution s = solve_static(bar, steel, clamped(Vec3(F, 0, 0)));
  const double bar_err = std::abs(mean_load_displacement(bar, s.displacement, 0) - fl_ea) / fl_ea;

  // Timoshenko cantilever, tip load P.
  const double Lc = 1.0, h = 0.05, t = 0.01, P = 100.0;
  Material mat;
  mat.youngs_modulus = 2e11;
  mat.poisson_ratio = 0.25;
  const double I = t * h * h * h / 12.0, G = mat.youngs_modulus / (2 * (1 + mat.poisson_ratio));
  const double beam = P * Lc * Lc * Lc / (3 * mat.youngs_modulus * I) + P * Lc / (5.0 / 6.0 * G * h * t);
  bool monotone = true;
  double previous = 1.0, last = 1.0;
  std::string errors;
  for (int n : {4, 8, 16, 32}) {
    const Mesh m = make_fixture("cantilever2d", {{"L", Lc}, {"h", h}, {"t", t}, {"n", n}});
    const Solution c = solve_static(m, mat, clamped(Vec3(0, -P, 0)));
    last = std::abs(-mean_load_displacement(m, c.displacement, 1) - beam) / beam;
    monotone = monotone && last < previous;
    previous = last;
    errors += (errors.empty() ? "" : " ") + num(last);
  }
  return {bar_err <= kBarTol && monotone && last <= kCantileverTol,
          "bar FL/EA error " + num(bar_err) + "; cantilever errors n=4..32 " + errors +
              (monotone ? " (monotone)" : " (not monotone)")};
}

// ---- 3 -----------------------------------------------------------------------------------------

Outcome von_mises_identities() {
  const double sigma = 1.234e8, tau = 5.6e7, pressure = -3e8;
  Eigen::Matrix3d uni = Eigen::Matrix3d::Zero(), hydro = pressure * Eigen::Matrix3d::Identity(),
                  shear = Eigen::Matrix3d::Zero();
  uni(0, 0) = sigma;
  shear(0, 1) = shear(1, 0) = tau;
  const double e1 = std::abs(von_mises(uni) - sigma) / sigma;
  const double e2 = std::abs(von_mises(hydro)) / std::abs(pressure);
  const double e3 = std::abs(von_mises(shear) - std::sqrt(3.0) * tau) / (std::sqrt(3.0) * tau);
  const double worst = std::max({e1, e2, e3});
  return {worst <= kVonMisesTol, "uniaxial " + num(e1) + ", hydrostatic " + num(e2) + ", shear " + num(e3)};
}

// ---- 4 -----------------------------------------------------------------------------------------

NodeField random_direction(const Mesh& m, std::mt19937& rng) {
  std::normal_distribution<double> n;
  NodeField d(m.node_count(), Vec3::Zero());
  for (auto& v : d)
    for (int c = 0; c < m.dimension(); ++c) v[c] = n(rng);
  const double s = max_norm(d);
  for (auto& v : d) v /= s;
  return d;
}

double bbox_size(const Mesh& m) {
  Vec3 lo = m.node(0), hi = m.node(0);
  for (const Vec3& x : m.nodes()) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return (hi - lo).maxCoeff();
}

Outcome gradient_oracles() {
  struct Case {
    std::string fixture;
    LoadCase loads;
  };
  LoadCase pressure;
  pressure.dirichlet.push_back({"pin", {true, true, true}, Vec3::Zero()});
  pressure.neumann.push_back({"load", NeumannKind::pressure, Vec3::Zero(), -5e7});
  LoadCase plate;
  plate.dirichlet.push_back({"pin", {true, true, false}, Vec3::Zero()});
  plate.neumann.push_back({"load", NeumannKind::total_force, Vec3(1e4, 0, 0), 0.0});
  const std::vector<Case> cases{{"lug3d", pressure}, {"plate_with_hole2d", plate},
                                {"cantilever2d", clamped(Vec3(0, -1e3, 0))}};
  const std::pair<Functional, double> functionals[] = {
      {Functional::volume, kFdVolume}, {Functional::compliance, kFdCompliance}, {Functional::aggregate, kFdAggregate}};
  const char* names[] = {"volume", "compliance", "aggregate"};

  bool pass = true;
  std::string detail;
  for (int f = 0; f < 3; ++f) {
    double worst = 0.0;
    for (const Case& c : cases) {
      const Mesh m = make_fixture(c.fixture);
      FdContext ctx;
      ctx.loads = c.loads;
      ctx.p = 8.0;
      std::mt19937 rng(17);
      const double h = (functionals[f].first == Functional::volume ? 1.0 : bbox_size(m)) * 1e-7;
      for (int i = 0; i < kFdDirections; ++i)
        worst = std::max(worst, fd_check(m, functionals[f].first, ctx, random_direction(m, rng), h));
    }
    pass = pass && worst <= functionals[f].second;
    detail += std::string(f ? ", " : "") + names[f] + " " + num(worst) + " (tol " + num(functionals[f].second) + ")";
  }
  return {pass, detail + "; 3 fixtures x 20 directions"};
}

// ---- 5, 7, 9 -----------------------------------------------------------------------------------

struct LugRuns {
  fs::path a, b;
  int exit_a = -1, exit_b = -1;
};

Outcome lug_optimization(const LugRuns& runs) {
  if (runs.exit_a != exit_ok) return {false, "optimize exited " + std::to_string(runs.exit_a)};
  const json s = read_json(runs.a / "summary.json");
  const double ratio = s["volume_ratio"].get<double>();
  const double theta = s["final"]["aggregate"].get<double>(), limit = s["stress_limit"].get<double>();
  const double initial_theta = s["initial"]["aggregate"].get<double>();

  std::istringstream csv(slurp(runs.a / "history.csv"));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  double min_quality = 1.0;
  while (std::getline(csv, line)) {
    std::stringstream row(line);
    std::string cell;
    for (int k = 0; k < 8; ++k) std::getline(row, cell, ',');
    min_quality = std::min(min_quality, std::stod(cell));
    ++rows;
  }

  const Mesh initial = make_fixture("lug3d");
  const Mesh final_mesh = load_mesh_file((runs.a / "final_mesh.json").string());
  bool frozen_same = final_mesh.node_count() == initial.node_count();
  for (Index v : region_nodes(initial, "frozen"))
    frozen_same = frozen_same && std::memcmp(initial.node(v).data(), final_mesh.node(v).data(), sizeof(Vec3)) == 0;
  const MeshReport q = measure(final_mesh);
  const bool valid = validate(final_mesh).is_valid && q.min_quality > 0.0 && min_quality > 0.0;

  const bool pass = ratio <= kLugVolumeRatio && theta <= kLugStressFactor * limit && valid && frozen_same &&
                    limit == initial_theta && rows <= 30;
  return {pass, "volume ratio " + num(ratio) + " (<= 0.85), final Theta/limit " + num(theta / limit) +
                    " (<= 1.02), steps " + std::to_string(rows) + ", stop " + s["stop_reason"].get<std::string>() +
                    ", min quality " + num(min_quality) + (frozen_same ? ", frozen nodes identical" : ", FROZEN MOVED")};
}

Outcome stl_integrity(const LugRuns& runs) {
  std::vector<std::pair<std::string, Mesh>> meshes{{"bar3d", make_fixture("bar3d")}, {"lug3d", make_fixture("lug3d")}};
  if (runs.exit_a == exit_ok) meshes.emplace_back("optimized lug", load_mesh_file((runs.a / "final_mesh.json").string()));
  bool pass = true;
  double worst_gauss = 0.0, worst_volume = 0.0;
  for (const auto& [name, m] : meshes) {
    const SurfaceModel s = surface_mesh(m);
    const ManifoldReport r = check_manifold(s);
    worst_gauss = std::max(worst_gauss, area_weighted_normal_sum(s).norm() / surface_area(s));
    const double v = measure(m).volume;
    worst_volume = std::max(worst_volume, std::abs(signed_volume(s) - v) / v);
    // The written file must survive a read back.
    const ManifoldReport file = check_manifold(read_stl(write_stl(s, StlFormat::binary)));
    pass = pass && r.watertight && r.winding_consistent && file.watertight && file.winding_consistent;
  }
  if (runs.exit_a == exit_ok) {
    const ManifoldReport r = check_manifold(read_stl(slurp(runs.a / "final.stl")));
    pass = pass && r.watertight && r.winding_consistent;
  }
  SurfaceModel one;
  one.triangles.push_back({{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, Vec3(0, 0, 1)});
  const std::size_t bytes = write_stl(one, StlFormat::binary).size();
  pass = pass && worst_gauss <= kGaussTol && worst_volume <= kVolumeTol && bytes == 134;
  return {pass, std::to_string(meshes.size()) + " surfaces watertight/consistent, normal sum/area " + num(worst_gauss) +
                    ", volume error " + num(worst_volume) + ", 1-triangle file " + std::to_string(bytes) + " bytes"};
}

Outcome determinism(const LugRuns& runs) {
  if (runs.exit_a != exit_ok || runs.exit_b != exit_ok) return {false, "a run failed"};
  bool pass = true;
  std::string detail;
  for (const char* f : {"history.csv", "final.stl"}) {
    const std::string x = slurp(runs.a / f), y = slurp(runs.b / f);
    const bool same = !x.empty() && x == y;
    pass = pass && same;
    detail += std::string(detail.empty() ? "" : ", ") + f + (same ? " identical" : " DIFFERS") + " (" +
              std::to_string(x.size()) + " bytes)";
  }
  return {pass, detail};
}

// ---- 6 -----------------------------------------------------------------------------------------

Outcome plate_smoothing(const fs::path& configs, const fs::path& scratch) {
  std::ostringstream err;
  const int code = run_optimize(load_config((configs / "plate_optimize.json").string()), (scratch / "plate").string(), err);
  if (code != exit_ok) return {false, "optimize exited " + std::to_string(code) + ": " + err.str()};
  const json s = read_json(scratch / "plate" / "summary.json");
  const double ratio = s["final"]["max_vm_Pa"].get<double>() / s["initial"]["max_vm_Pa"].get<double>();
  return {ratio <= kPlateStressRatio && s["steps"].get<int>() == 30,
          "max von Mises final/initial " + num(ratio) + " (<= 0.8) after " + std::to_string(s["steps"].get<int>()) +
              " steps"};
}

// ---- 8 -----------------------------------------------------------------------------------------

Outcome draft_truth_table() {
  const SurfaceModel cube = surface_mesh(make_fixture("bar3d", {{"L", 0.1}, {"a", 0.1}, {"n", 1}}));
  std::size_t side_walls = 0;
  for (const auto& t : cube.triangles) side_walls += std::abs(t.normal.z()) < 1e-12;
  const DraftReport c = draft_check(cube, Vec3::UnitZ(), 2.0);
  bool only_walls = c.violations.size() == 8 && side_walls == 8;
  for (const auto& v : c.violations) only_walls = only_walls && std::abs(cube.triangles[v.triangle].normal.z()) < 1e-12;

  SurfaceModel pyramid;
  const Vec3 apex(0, 0, 1);
  const Vec3 b[4] = {Vec3(-1, -1, 0), Vec3(1, -1, 0), Vec3(1, 1, 0), Vec3(-1, 1, 0)};
  auto add = [&](const Vec3& p, const Vec3& q, const Vec3& r) {
    pyramid.triangles.push_back({{p, q, r}, (q - p).cross(r - p).normalized()});
  };
  for (int i = 0; i < 4; ++i) add(b[i], b[(i + 1) % 4], apex);
  add(b[0], b[2], b[1]);
  add(b[0], b[3], b[2]);
  const DraftReport p = draft_check(pyramid, Vec3::UnitZ(), 2.0);
  return {only_walls && p.violations.empty(), "cube: " + std::to_string(c.violations.size()) +
                                                  " violations (8 side walls expected); 45-degree pyramid: " +
                                                  std::to_string(p.violations.size()) + " (0 expected)"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path configs = argc > 1 ? fs::path(argv[1]) : fs::path(TRACSHAPE_CONFIG_DIR);
  const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "tracshape_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  report(1, "patch test", 1.0, patch_test);
  report(2, "analytic statics", 30.0, analytic_statics);
  report(3, "von Mises identities", 0.0, von_mises_identities);
  report(4, "gradient oracles", 120.0, gradient_oracles);

  LugRuns runs{scratch / "lug_a", scratch / "lug_b"};
  report(5, "lug optimization", 300.0, [&] {
    std::ostringstream err;
    runs.exit_a = run_optimize(load_config((configs / "lug3d_optimize.json").string()), runs.a.string(), err);
    Outcome o = lug_optimization(runs);
    if (!err.str().empty()) o.detail += "; " + err.str();
    return o;
  });
  report(6, "plate stress smoothing", 0.0, [&] { return plate_smoothing(configs, scratch); });
  report(7, "STL integrity", 0.0, [&] { return stl_integrity(runs); });
  report(8, "draft truth table", 0.0, draft_truth_table);
  report(9, "determinism", 0.0, [&] {
    std::ostringstream err;
    runs.exit_b = run_optimize(load_config((configs / "lug3d_optimize.json").string()), runs.b.string(), err);
    return determinism(runs);
  });

  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
