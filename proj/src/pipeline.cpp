#include "tracshape/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tracshape/errors.hpp"
#include "tracshape/format.hpp"

namespace tracshape {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; }))
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + " must be a number");
  return v.get<double>();
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + " must be a string");
  return v.get<std::string>();
}

bool boolean(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError(where + " must be true or false");
  return v.get<bool>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
  return v.get<int>();
}

Vec3 vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() < 2 || v.size() > 3) throw ConfigError(where + " must be an array of 2 or 3 numbers");
  Vec3 out = Vec3::Zero();
  for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<int>(k)] = number(v[k], where);
  return out;
}

std::optional<double> optional_number(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return number(*it, where + "." + key);
}

MeshSource parse_mesh(const json& v, const std::string& base_dir) {
  MeshSource out;
  auto resolve = [&](const json& path) {
    fs::path p(text(path, "mesh path"));
    if (p.is_relative()) p = fs::path(base_dir) / p;
    return p.lexically_normal().string();
  };
  if (v.is_string()) {
    out.path = resolve(v);
    return out;
  }
  reject_unknown_keys(v, {"fixture", "params", "path"}, "mesh");
  if (v.contains("path") == v.contains("fixture")) throw ConfigError("mesh needs exactly one of 'path' and 'fixture'");
  if (v.contains("path")) {
    if (v.contains("params")) throw ConfigError("mesh.params only applies to fixtures");
    out.path = resolve(v["path"]);
    return out;
  }
  out.fixture = text(v["fixture"], "mesh.fixture");
  if (v.contains("params")) {
    if (!v["params"].is_object()) throw ConfigError("mesh.params must be an object");
    for (const auto& item : v["params"].items())
      out.params[item.key()] = number(item.value(), "mesh.params." + item.key());
  }
  return out;
}

Material parse_material(const json& v) {
  if (v.is_string()) return named_material(v.get<std::string>());
  reject_unknown_keys(v, {"base", "youngs_modulus", "poisson_ratio", "density", "allowed_stress"}, "material");
  Material m = v.contains("base") ? named_material(text(v["base"], "material.base")) : Material::paper_steel();
  if (auto x = optional_number(v, "youngs_modulus", "material")) m.youngs_modulus = *x;
  if (auto x = optional_number(v, "poisson_ratio", "material")) m.poisson_ratio = *x;
  if (auto x = optional_number(v, "density", "material")) m.density = *x;
  if (auto x = optional_number(v, "allowed_stress", "material")) m.allowed_stress = *x;
  try {
    m.check();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("material: ") + e.what());
  }
  return m;
}

LoadCase parse_loads(const json& v) {
  reject_unknown_keys(v, {"dirichlet", "neumann"}, "loads");
  LoadCase out;
  if (v.contains("dirichlet")) {
    if (!v["dirichlet"].is_array()) throw ConfigError("loads.dirichlet must be an array");
    for (const auto& d : v["dirichlet"]) {
      const std::string where = "loads.dirichlet entry";
      reject_unknown_keys(d, {"region", "fixed", "value"}, where);
      DirichletCondition bc;
      if (!d.contains("region")) throw ConfigError(where + " needs 'region'");
      bc.region = text(d["region"], where + ".region");
      if (d.contains("fixed")) {
        const json& f = d["fixed"];
        if (!f.is_array() || f.size() < 2 || f.size() > 3) throw ConfigError(where + ".fixed must list 2 or 3 flags");
        bc.fixed = {false, false, false};
        for (std::size_t k = 0; k < f.size(); ++k) bc.fixed[k] = boolean(f[k], where + ".fixed");
      }
      if (d.contains("value")) bc.value = vec3(d["value"], where + ".value");
      out.dirichlet.push_back(bc);
    }
  }
  if (v.contains("neumann")) {
    if (!v["neumann"].is_array()) throw ConfigError("loads.neumann must be an array");
    for (const auto& n : v["neumann"]) {
      const std::string where = "loads.neumann entry";
      reject_unknown_keys(n, {"region", "kind", "vector", "pressure"}, where);
      NeumannCondition bc;
      if (!n.contains("region") || !n.contains("kind")) throw ConfigError(where + " needs 'region' and 'kind'");
      bc.region = text(n["region"], where + ".region");
      const std::string kind = text(n["kind"], where + ".kind");
      if (kind == "total_force") {
        bc.kind = NeumannKind::total_force;
        if (!n.contains("vector")) throw ConfigError(where + ": total_force needs 'vector' (N)");
        bc.vector = vec3(n["vector"], where + ".vector");
      } else if (kind == "pressure") {
        bc.kind = NeumannKind::pressure;
        if (!n.contains("pressure")) throw ConfigError(where + ": pressure needs 'pressure' (Pa)");
        bc.pressure = number(n["pressure"], where + ".pressure");
      } else {
        throw ConfigError(where + ": unknown kind '" + kind + "' (total_force or pressure)");
      }
      out.neumann.push_back(bc);
    }
  }
  return out;
}

ProblemSpec parse_problem(const json& v) {
  reject_unknown_keys(v,
                      {"mode", "design_region", "frozen_regions", "stress_limit", "volume_limit", "p", "sigma_ref",
                       "lambda", "mu", "mu_growth", "volume_reduction_cap", "max_steps", "move_cap", "quality_floor",
                       "max_halvings", "gradient_support", "smoothing_poisson_ratio"},
                      "problem");
  ProblemSpec out;
  OptimizationProblem& p = out.problem;
  if (v.contains("mode")) {
    const std::string mode = text(v["mode"], "problem.mode");
    if (mode == "volume_min_stress_constrained") {
      p.mode = OptimizationMode::volume_min_stress_constrained;
    } else if (mode == "compliance_min_volume_constrained") {
      p.mode = OptimizationMode::compliance_min_volume_constrained;
    } else {
      throw ConfigError("problem.mode: unknown mode '" + mode + "'");
    }
  }
  if (v.contains("design_region")) out.design_region = text(v["design_region"], "problem.design_region");
  if (v.contains("frozen_regions")) {
    if (!v["frozen_regions"].is_array()) throw ConfigError("problem.frozen_regions must be an array");
    out.frozen_regions.clear();
    for (const auto& r : v["frozen_regions"]) out.frozen_regions.push_back(text(r, "problem.frozen_regions"));
  }
  p.stress_limit = optional_number(v, "stress_limit", "problem");
  p.volume_limit = optional_number(v, "volume_limit", "problem");
  p.sigma_ref = optional_number(v, "sigma_ref", "problem");
  p.volume_reduction_cap = optional_number(v, "volume_reduction_cap", "problem");
  if (auto x = optional_number(v, "p", "problem")) p.p = *x;
  if (auto x = optional_number(v, "lambda", "problem")) p.lambda = *x;
  if (auto x = optional_number(v, "mu", "problem")) p.mu = *x;
  if (auto x = optional_number(v, "mu_growth", "problem")) p.mu_growth = *x;
  if (auto x = optional_number(v, "move_cap", "problem")) p.step.move_cap = *x;
  if (auto x = optional_number(v, "quality_floor", "problem")) p.step.quality_floor = *x;
  if (auto x = optional_number(v, "smoothing_poisson_ratio", "problem")) p.smoothing_poisson_ratio = *x;
  if (v.contains("max_steps")) p.max_steps = integer(v["max_steps"], "problem.max_steps");
  if (v.contains("max_halvings")) p.step.max_halvings = integer(v["max_halvings"], "problem.max_halvings");
  if (v.contains("gradient_support")) {
    const std::string s = text(v["gradient_support"], "problem.gradient_support");
    if (s == "design") {
      p.support = GradientSupport::design;
    } else if (s == "all_movable") {
      p.support = GradientSupport::all_movable;
    } else {
      throw ConfigError("problem.gradient_support: unknown value '" + s + "'");
    }
  }
  return out;
}

SolverOptions parse_solver(const json& v) {
  reject_unknown_keys(v, {"method", "rtol", "iteration_factor", "direct_limit"}, "solver");
  SolverOptions out;
  if (v.contains("method")) {
    const std::string m = text(v["method"], "solver.method");
    if (m == "automatic") {
      out.method = SolverMethod::automatic;
    } else if (m == "direct") {
      out.method = SolverMethod::direct;
    } else if (m == "conjugate_gradient") {
      out.method = SolverMethod::conjugate_gradient;
    } else {
      throw ConfigError("solver.method: unknown method '" + m + "'");
    }
  }
  if (auto x = optional_number(v, "rtol", "solver")) out.rtol = *x;
  if (auto x = optional_number(v, "iteration_factor", "solver")) out.iteration_factor = *x;
  if (v.contains("direct_limit")) out.direct_limit = static_cast<std::size_t>(integer(v["direct_limit"], "solver.direct_limit"));
  if (!(out.rtol > 0.0) || !(out.iteration_factor > 0.0)) throw ConfigError("solver: rtol and iteration_factor must be positive");
  return out;
}

ExportSpec parse_export(const json& v) {
  reject_unknown_keys(v, {"stl", "format", "scale"}, "export");
  ExportSpec out;
  if (v.contains("stl")) out.stl = boolean(v["stl"], "export.stl");
  if (v.contains("format")) {
    const std::string f = text(v["format"], "export.format");
    if (f == "binary") {
      out.format = StlFormat::binary;
    } else if (f == "ascii") {
      out.format = StlFormat::ascii;
    } else {
      throw ConfigError("export.format must be 'binary' or 'ascii'");
    }
  }
  if (auto x = optional_number(v, "scale", "export")) out.scale = *x;
  if (!(out.scale > 0.0)) throw ConfigError("export.scale must be positive");
  return out;
}

std::vector<Index> union_of_regions(const Mesh& mesh, const std::vector<std::string>& names) {
  std::vector<Index> out;
  for (const auto& name : names) {
    const auto nodes = region_nodes(mesh, name);
    out.insert(out.end(), nodes.begin(), nodes.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

json response_json(double volume, const Material& material, const HistoryRecord& r) {
  return {{"volume_m3", volume},
          {"mass_kg", volume * material.density},
          {"compliance_J", r.compliance},
          {"max_vm_Pa", r.max_vm},
          {"max_vm_MPa", r.max_vm / 1e6},
          {"aggregate", r.aggregate}};
}

std::string svg_number(double v) { return format_significant(v, 6); }

}  // namespace

Material named_material(const std::string& name) {
  if (name == "paper-steel") return Material::paper_steel();
  throw ConfigError("unknown material '" + name + "' (known: paper-steel)");
}

RunConfig parse_config(std::string_view text_in, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text_in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  reject_unknown_keys(doc, {"mesh", "material", "loads", "problem", "solver", "export", "p", "sigma_ref", "output_dir", "seed"},
                      "config");
  RunConfig cfg;
  if (!doc.contains("mesh")) throw ConfigError("config needs 'mesh'");
  cfg.mesh = parse_mesh(doc["mesh"], base_dir);
  if (doc.contains("material")) cfg.material = parse_material(doc["material"]);
  if (doc.contains("loads")) cfg.loads = parse_loads(doc["loads"]);
  if (doc.contains("problem")) cfg.problem = parse_problem(doc["problem"]);
  if (doc.contains("solver")) cfg.solver = parse_solver(doc["solver"]);
  if (doc.contains("export")) cfg.export_options = parse_export(doc["export"]);
  if (auto x = optional_number(doc, "p", "config")) cfg.p = *x;
  cfg.sigma_ref = optional_number(doc, "sigma_ref", "config");
  if (!(cfg.p >= 2.0)) throw ConfigError("p must be >= 2");
  if (cfg.sigma_ref && !(*cfg.sigma_ref > 0.0)) throw ConfigError("sigma_ref must be positive");
  if (doc.contains("output_dir")) {
    fs::path p(text(doc["output_dir"], "output_dir"));
    if (p.is_relative()) p = fs::path(base_dir) / p;
    cfg.output_dir = p.lexically_normal().string();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer()) throw ConfigError("seed must be an integer");
    cfg.seed = doc["seed"].get<long long>();
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path parent = fs::path(path).parent_path();
  return parse_config(ss.str(), parent.empty() ? "." : parent.string());
}

Mesh load_config_mesh(const MeshSource& source) {
  if (!source.path.empty()) {
    if (!fs::exists(source.path)) throw ConfigError("mesh file '" + source.path + "' does not exist");
    return load_mesh_file(source.path);
  }
  return make_fixture(source.fixture, source.params);
}

std::string history_csv(const std::vector<HistoryRecord>& history) {
  std::string out(kHistoryHeader);
  out += '\n';
  for (const auto& r : history) {
    out += std::to_string(r.iteration);
    for (double v : {r.volume, r.compliance, r.max_vm, r.aggregate, r.step_size, r.constraint_violation, r.min_quality}) {
      out += ',';
      out += format_significant(v, 17);
    }
    out += r.accepted ? ",1\n" : ",0\n";
  }
  return out;
}

std::string history_svg(const std::vector<HistoryRecord>& history, const HistoryRecord& initial) {
  const double width = 640, height = 400, left = 70, right = 20, top = 30, bottom = 50;
  std::vector<double> vol, vm;
  for (const auto& r : history) {
    vol.push_back(initial.volume > 0 ? r.volume / initial.volume : 0.0);
    vm.push_back(initial.max_vm > 0 ? r.max_vm / initial.max_vm : 0.0);
  }
  double lo = 1.0, hi = 1.0;
  for (const auto* series : {&vol, &vm}) {
    for (double v : *series) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double pad = 0.05 * std::max(hi - lo, 0.1);
  lo -= pad;
  hi += pad;
  const double last = history.empty() ? 1.0 : static_cast<double>(history.back().iteration);
  auto px = [&](double it) { return left + (width - left - right) * it / std::max(last, 1.0); };
  auto py = [&](double v) { return top + (height - top - bottom) * (hi - v) / (hi - lo); };
  auto points = [&](const std::vector<double>& series) {
    std::string s;
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (!s.empty()) s += ' ';
      s += svg_number(px(history[i].iteration)) + "," + svg_number(py(series[i]));
    }
    return s;
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  out += "  <rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  out += "  <line x1=\"" + svg_number(left) + "\" y1=\"" + svg_number(height - bottom) + "\" x2=\"" +
         svg_number(width - right) + "\" y2=\"" + svg_number(height - bottom) + "\" stroke=\"black\"/>\n";
  out += "  <line x1=\"" + svg_number(left) + "\" y1=\"" + svg_number(top) + "\" x2=\"" + svg_number(left) +
         "\" y2=\"" + svg_number(height - bottom) + "\" stroke=\"black\"/>\n";
  out += "  <text x=\"" + svg_number((left + width - right) / 2) + "\" y=\"" + svg_number(height - 12) +
         "\" text-anchor=\"middle\" font-size=\"13\">iteration</text>\n";
  out += "  <text x=\"16\" y=\"" + svg_number((top + height - bottom) / 2) + "\" transform=\"rotate(-90 16 " +
         svg_number((top + height - bottom) / 2) + ")\" text-anchor=\"middle\" font-size=\"13\">value / initial</text>\n";
  for (double tick : {lo, 1.0, hi}) {
    out += "  <text x=\"" + svg_number(left - 6) + "\" y=\"" + svg_number(py(tick) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + format_significant(tick, 3) + "</text>\n";
  }
  out += "  <text x=\"" + svg_number(left) + "\" y=\"" + svg_number(height - bottom + 16) +
         "\" text-anchor=\"middle\" font-size=\"11\">0</text>\n";
  out += "  <text x=\"" + svg_number(width - right) + "\" y=\"" + svg_number(height - bottom + 16) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + format_significant(last, 6) + "</text>\n";
  out += "  <polyline id=\"volume\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" + points(vol) + "\"/>\n";
  out += "  <polyline id=\"max_vm\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"" + points(vm) + "\"/>\n";
  out += "  <text x=\"" + svg_number(width - right - 4) + "\" y=\"" + svg_number(top - 10) +
         "\" text-anchor=\"end\" font-size=\"12\"><tspan fill=\"#1f77b4\">volume</tspan> <tspan fill=\"#d62728\">max von Mises</tspan></text>\n";
  out += "</svg>\n";
  return out;
}

std::string vtk_fields(const Mesh& mesh, const Solution& solution) {
  const int dim = mesh.dimension();
  const auto n = mesh.node_count(), ne = mesh.element_count();
  if (static_cast<std::size_t>(solution.displacement.size()) != mesh.dof_count() ||
      static_cast<std::size_t>(solution.von_mises.size()) != ne)
    throw ValidationError("solution does not match the mesh");
  const int npe = dim + 1;
  std::string out = "# vtk DataFile Version 3.0\ntracshape solution\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out += "POINTS " + std::to_string(n) + " double\n";
  for (const Vec3& x : mesh.nodes())
    out += format_double(x.x()) + " " + format_double(x.y()) + " " + format_double(x.z()) + "\n";
  out += "CELLS " + std::to_string(ne) + " " + std::to_string(ne * static_cast<std::size_t>(npe + 1)) + "\n";
  for (Index e = 0; e < static_cast<Index>(ne); ++e) {
    out += std::to_string(npe);
    for (Index v : mesh.element_nodes(e)) out += " " + std::to_string(v);
    out += "\n";
  }
  out += "CELL_TYPES " + std::to_string(ne) + "\n";
  const std::string type = dim == 3 ? "10\n" : "5\n";
  for (std::size_t e = 0; e < ne; ++e) out += type;
  out += "POINT_DATA " + std::to_string(n) + "\nVECTORS displacement double\n";
  for (std::size_t v = 0; v < n; ++v) {
    for (int c = 0; c < 3; ++c) {
      const double u = c < dim ? solution.displacement[static_cast<Index>(v) * dim + c] : 0.0;
      out += format_double(u) + (c < 2 ? " " : "\n");
    }
  }
  out += "CELL_DATA " + std::to_string(ne) + "\nSCALARS von_mises double 1\nLOOKUP_TABLE default\n";
  for (std::size_t e = 0; e < ne; ++e) out += format_double(solution.von_mises[static_cast<Index>(e)]) + "\n";
  return out;
}

int run_solve(const RunConfig& config, const std::string& out_dir, std::ostream& err) {
  std::string vtk, summary;
  try {
    const Mesh mesh = load_config_mesh(config.mesh);
    const double sigma_ref = config.sigma_ref.value_or(config.material.allowed_stress);
    const Solution solution = solve_static(mesh, config.material, config.loads, config.solver);
    const Response r = evaluate(mesh, solution, config.p, sigma_ref);
    const double volume = measure(mesh).volume;
    HistoryRecord rec;
    rec.compliance = r.compliance;
    rec.max_vm = r.max_vm;
    rec.aggregate = r.aggregate;
    json doc = response_json(volume, config.material, rec);
    doc["p"] = config.p;
    doc["sigma_ref_Pa"] = sigma_ref;
    doc["reaction_N"] = {solution.reaction.x(), solution.reaction.y(), solution.reaction.z()};
    doc["nodes"] = mesh.node_count();
    doc["elements"] = mesh.element_count();
    summary = doc.dump(2) + "\n";
    vtk = vtk_fields(mesh, solution);
  } catch (const SolveError& e) {
    err << "solve failed: " << e.what() << "\n";
    return exit_solve;
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << "\n";
    return exit_config;
  }
  try {
    fs::create_directories(out_dir);
    write_file_atomic((fs::path(out_dir) / "solution.vtk").string(), vtk);
    write_file_atomic((fs::path(out_dir) / "summary.json").string(), summary);
  } catch (const std::exception& e) {
    err << "cannot write output: " << e.what() << "\n";
    return exit_config;
  }
  return exit_ok;
}

int run_optimize(const RunConfig& config, const std::string& out_dir, std::ostream& err) {
  if (!config.problem) {
    err << "configuration error: optimize needs a 'problem' block\n";
    return exit_config;
  }
  std::vector<std::pair<std::string, std::string>> artifacts;
  bool stalled = false;
  try {
    const Mesh mesh = load_config_mesh(config.mesh);
    OptimizationProblem problem = config.problem->problem;
    problem.design = region_nodes(mesh, config.problem->design_region);
    problem.frozen = union_of_regions(mesh, config.problem->frozen_regions);
    if (!problem.sigma_ref) problem.sigma_ref = config.sigma_ref;
    const OptimizationResult result = optimize(mesh, config.material, config.loads, problem, config.solver);
    stalled = result.reason == StopReason::stalled;

    const double sigma_ref = problem.sigma_ref.value_or(config.material.allowed_stress);
    const Solution final_solution = solve_static(result.mesh, config.material, config.loads, config.solver);
    const HistoryRecord final_record = result.history.empty() ? result.initial : result.history.back();
    json doc;
    doc["initial"] = response_json(result.initial.volume, config.material, result.initial);
    doc["final"] = response_json(final_record.volume, config.material, final_record);
    doc["volume_ratio"] = final_record.volume / result.initial.volume;
    doc["volume_reduction"] = 1.0 - final_record.volume / result.initial.volume;
    doc["max_vm_reduction_factor"] = final_record.max_vm > 0 ? result.initial.max_vm / final_record.max_vm : 0.0;
    doc["steps"] = result.history.size();
    doc["accepted_steps"] = std::count_if(result.history.begin(), result.history.end(),
                                          [](const HistoryRecord& h) { return h.accepted; });
    doc["stop_reason"] = to_string(result.reason);
    doc["stalled"] = stalled;
    doc["mode"] = problem.mode == OptimizationMode::volume_min_stress_constrained ? "volume_min_stress_constrained"
                                                                                  : "compliance_min_volume_constrained";
    if (problem.mode == OptimizationMode::volume_min_stress_constrained) {
      doc["stress_limit"] = result.stress_limit;
    } else {
      doc["volume_limit_m3"] = result.volume_limit;
    }
    doc["p"] = problem.p;
    doc["sigma_ref_Pa"] = sigma_ref;
    doc["lambda"] = result.lambda;
    doc["mu"] = result.mu;

    artifacts.emplace_back("history.csv", history_csv(result.history));
    artifacts.emplace_back("history.svg", history_svg(result.history, result.initial));
    artifacts.emplace_back("final_mesh.json", mesh_to_json(result.mesh));
    artifacts.emplace_back("final_solution.vtk", vtk_fields(result.mesh, final_solution));
    if (result.mesh.dimension() == 3 && config.export_options.stl) {
      const SurfaceModel surface = surface_mesh(result.mesh, config.export_options.scale);
      const ManifoldReport manifold = check_manifold(surface);
      doc["stl"] = {{"triangles", surface.triangles.size()},
                    {"watertight", manifold.watertight},
                    {"winding_consistent", manifold.winding_consistent},
                    {"scale", config.export_options.scale}};
      artifacts.emplace_back("final.stl", write_stl(surface, config.export_options.format));
    }
    artifacts.emplace_back("summary.json", doc.dump(2) + "\n");
  } catch (const SolveError& e) {
    err << "solve failed: " << e.what() << "\n";
    return exit_solve;
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << "\n";
    return exit_config;
  }
  try {
    fs::create_directories(out_dir);
    for (const auto& [name, contents] : artifacts) write_file_atomic((fs::path(out_dir) / name).string(), contents);
  } catch (const std::exception& e) {
    err << "cannot write output: " << e.what() << "\n";
    return exit_config;
  }
  if (stalled) {
    err << "optimization stalled: 3 consecutive rejected steps\n";
    return exit_stalled;
  }
  return exit_ok;
}

}  // namespace tracshape
