#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tracshape/errors.hpp"
#include "tracshape/pipeline.hpp"
#include "tracshape/stl.hpp"

using namespace tracshape;
using nlohmann::json;

namespace {

Mesh mesh_from_path(const std::string& path) {
  MeshSource source;
  source.path = path;
  return load_config_mesh(source);
}

Vec3 parse_pull(const std::string& s) {
  std::stringstream in(s);
  Vec3 v;
  char c1 = 0, c2 = 0;
  if (!(in >> v.x() >> c1 >> v.y() >> c2 >> v.z()) || c1 != ',' || c2 != ',')
    throw ConfigError("--pull expects x,y,z");
  return v;
}

int run_config_command(const std::string& config_path, const std::string& out, bool optimize) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return exit_config;
  }
  const std::string dir = !out.empty() ? out : (!cfg.output_dir.empty() ? cfg.output_dir : std::string("."));
  return optimize ? run_optimize(cfg, dir, std::cerr) : run_solve(cfg, dir, std::cerr);
}

int export_stl(const std::string& mesh_path, const std::string& out, bool ascii, double scale) {
  const Mesh mesh = mesh_from_path(mesh_path);
  const SurfaceModel surface = surface_mesh(mesh, scale);
  const ManifoldReport report = check_manifold(surface);
  write_stl_file(out, surface, ascii ? StlFormat::ascii : StlFormat::binary);
  const json doc{{"triangles", surface.triangles.size()},
                 {"watertight", report.watertight},
                 {"winding_consistent", report.winding_consistent},
                 {"edge_defects", report.edge_defects.size()}};
  std::cout << doc.dump(2) << "\n";
  return exit_ok;
}

int check_draft(const std::string& mesh_path, const std::string& pull, double min_angle) {
  const Mesh mesh = mesh_from_path(mesh_path);
  const DraftReport report = draft_check(surface_mesh(mesh), parse_pull(pull), min_angle);
  json violations = json::array();
  for (const auto& v : report.violations) violations.push_back({{"triangle", v.triangle}, {"angle_deg", v.angle}});
  const json doc{{"pull", {report.pull.x(), report.pull.y(), report.pull.z()}},
                 {"min_angle_deg", report.min_angle},
                 {"violation_count", report.violations.size()},
                 {"violations", violations}};
  std::cout << doc.dump(2) << "\n";
  return exit_ok;
}

int mesh_info(const std::string& mesh_path) {
  const Mesh mesh = mesh_from_path(mesh_path);
  const MeshReport validity = validate(mesh);
  const MeshReport m = measure(mesh);
  json regions = json::object();
  for (const auto& [name, tag] : mesh.regions()) {
    regions[name] = tag.kind == RegionKind::nodes ? json{{"nodes", tag.nodes.size()}}
                                                  : json{{"facets", tag.facets.size()}};
  }
  const json doc{{"dimension", mesh.dimension()},
                 {"nodes", mesh.node_count()},
                 {"elements", mesh.element_count()},
                 {"thickness_m", mesh.thickness()},
                 {"volume_m3", m.volume},
                 {"surface_area_m2", m.surface_area},
                 {"min_quality", m.min_quality},
                 {"worst_element", m.worst_element},
                 {"valid", validity.is_valid},
                 {"messages", validity.messages},
                 {"regions", regions}};
  std::cout << doc.dump(2) << "\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traction-method shape optimization of linear-elastic parts"};
  app.require_subcommand(1);

  std::string config, out, mesh_path, pull;
  bool ascii = false;
  double scale = 1000.0, min_angle = 0.0;

  auto* solve = app.add_subcommand("solve", "Static analysis: solution.vtk and summary.json");
  solve->add_option("--config", config, "Run configuration (JSON)")->required();
  solve->add_option("--out", out, "Output directory (overrides output_dir)");

  auto* optimize = app.add_subcommand("optimize", "Shape optimization: history, final mesh, fields and STL");
  optimize->add_option("--config", config, "Run configuration (JSON)")->required();
  optimize->add_option("--out", out, "Output directory (overrides output_dir)");

  auto* stl = app.add_subcommand("export-stl", "Write the boundary of a 3D mesh as STL");
  stl->add_option("--mesh", mesh_path, "Native mesh JSON")->required();
  stl->add_option("--out", out, "STL file")->required();
  stl->add_flag("--ascii", ascii, "ASCII instead of binary");
  stl->add_option("--scale", scale, "Coordinate multiplier (1000: m to mm)");

  auto* draft = app.add_subcommand("check-draft", "List faces with insufficient draft for casting");
  draft->add_option("--mesh", mesh_path, "Native mesh JSON")->required();
  draft->add_option("--pull", pull, "Pull direction x,y,z (unit vector)")->required();
  draft->add_option("--min-angle", min_angle, "Minimum draft angle in degrees")->required();

  auto* info = app.add_subcommand("mesh-info", "Print mesh statistics");
  info->add_option("--mesh", mesh_path, "Native mesh JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_config;
  }

  try {
    if (*solve) return run_config_command(config, out, false);
    if (*optimize) return run_config_command(config, out, true);
    if (*stl) return export_stl(mesh_path, out, ascii, scale);
    if (*draft) return check_draft(mesh_path, pull, min_angle);
    if (*info) return mesh_info(mesh_path);
  } catch (const SolveError& e) {
    std::cerr << "solve failed: " << e.what() << "\n";
    return exit_solve;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
  return exit_ok;
}
