#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracshape/fem.hpp"
#include "tracshape/fixtures.hpp"
#include "tracshape/mesh.hpp"
#include "tracshape/optimize.hpp"
#include "tracshape/stl.hpp"

namespace tracshape {

/// Process exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_solve = 2, exit_stalled = 3 };

struct MeshSource {
  std::string path;  // native JSON mesh; empty when a fixture is used
  std::string fixture;
  FixtureParams params;
};

struct ProblemSpec {
  OptimizationProblem problem;  // design and frozen are resolved from the regions below
  std::string design_region = "design";
  std::vector<std::string> frozen_regions{"frozen"};
};

struct ExportSpec {
  bool stl = true;  // 3D meshes only
  StlFormat format = StlFormat::binary;
  double scale = 1000.0;
};

/// One JSON document; see README for the schema.
struct RunConfig {
  MeshSource mesh;
  Material material;
  LoadCase loads;
  std::optional<ProblemSpec> problem;
  SolverOptions solver;
  ExportSpec export_options;
  double p = 8.0;
  std::optional<double> sigma_ref;  // defaults to material.allowed_stress
  std::string output_dir;
  long long seed = 0;
};

/// Throws ConfigError (unknown keys, wrong types, bad values) or ParseError (JSON syntax).
/// Relative paths resolve against `base_dir`.
RunConfig parse_config(std::string_view json, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

/// Builds the fixture or loads the mesh file. Throws ConfigError naming a missing path.
Mesh load_config_mesh(const MeshSource& source);

/// Material by name ("paper-steel"); throws ConfigError for an unknown name.
Material named_material(const std::string& name);

// ---- serialization -----------------------------------------------------------------------------

inline constexpr std::string_view kHistoryHeader =
    "iteration,volume_m3,compliance_J,max_vm_Pa,aggregate,step_size,violation,min_quality,accepted";

/// Header plus one line per record, 17 significant digits.
std::string history_csv(const std::vector<HistoryRecord>& history);

/// Volume and max von Mises per record, each divided by its value in `initial`.
std::string history_svg(const std::vector<HistoryRecord>& history, const HistoryRecord& initial);

/// VTK legacy 3.0 ASCII unstructured grid with point displacements and cell von Mises stress.
std::string vtk_fields(const Mesh& mesh, const Solution& solution);

// ---- commands ----------------------------------------------------------------------------------

/// Each command prints diagnostics to `err` and returns an ExitCode. Artifacts are written atomically and
/// only after every computation succeeded (except on a stall, where they are written and flagged).
int run_solve(const RunConfig& config, const std::string& out_dir, std::ostream& err);
int run_optimize(const RunConfig& config, const std::string& out_dir, std::ostream& err);

}  // namespace tracshape
