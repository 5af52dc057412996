#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tracshape/fem.hpp"
#include "tracshape/mesh.hpp"
#include "tracshape/sensitivity.hpp"

namespace tracshape {

struct StepControl {
  double move_cap = 0.2;        // first trial moves the fastest node by move_cap * min edge length
  double quality_floor = 0.05;  // candidates below this element quality are refused
  int max_halvings = 8;
};

struct StepResult {
  Mesh mesh;
  bool accepted = false;
  double step_size = 0.0;  // t * max|V| / min edge length; 0 when rejected
  double t = 0.0;          // pseudo-time of the accepted candidate
  int halvings = 0;
};

/// Merit of a candidate mesh, or nullopt when it cannot be evaluated (e.g. the solve fails).
using MeritFunction = std::function<std::optional<double>(const Mesh&)>;

/// Backtracking update x + t V. A candidate is refused if an element inverts, its quality drops below the
/// floor, or (when `merit` is given) its merit is not below `current_merit`.
StepResult step(const Mesh& mesh, const NodeField& velocity, const StepControl& control,
                const MeritFunction& merit = {}, double current_merit = 0.0);

enum class OptimizationMode { volume_min_stress_constrained, compliance_min_volume_constrained };

/// Which nodes carry the raw gradient into the smoothing solve.
enum class GradientSupport {
  design,      // boundary design nodes only (the gradient acts as a boundary traction)
  all_movable  // every node that is not frozen
};

struct OptimizationProblem {
  OptimizationMode mode = OptimizationMode::volume_min_stress_constrained;
  std::vector<Index> design;  // sorted boundary nodes that may move
  std::vector<Index> frozen;  // sorted nodes with zero velocity
  std::optional<double> stress_limit;  // Theta bound; defaults to the initial Theta (mode 1)
  std::optional<double> volume_limit;  // m^3; defaults to the initial volume (mode 2)
  double p = 8.0;
  std::optional<double> sigma_ref;     // defaults to material.allowed_stress
  double lambda = 0.0;
  double mu = 10.0;
  double mu_growth = 2.0;              // applied when the violation stays above 1% for two iterations
  std::optional<double> volume_reduction_cap;  // stop once volume <= (1 - cap) * initial
  int max_steps = 30;
  StepControl step;
  GradientSupport support = GradientSupport::design;
  double smoothing_poisson_ratio = 0.3;

  /// Throws ValidationError when an invariant fails.
  void check(const Mesh& mesh) const;
};

struct HistoryRecord {
  int iteration = 0;
  double volume = 0.0;       // m^3
  double compliance = 0.0;   // J
  double max_vm = 0.0;       // Pa
  double aggregate = 0.0;    // Theta
  double step_size = 0.0;
  double constraint_violation = 0.0;  // max(0, g)
  double min_quality = 0.0;
  bool accepted = false;
  // Merit before and after the step, both under the multipliers the step was taken with.
  double merit_before = 0.0;
  double merit_after = 0.0;
};

enum class StopReason { max_steps, volume_cap, stalled };

std::string to_string(StopReason reason);

struct OptimizationResult {
  Mesh mesh;
  std::vector<HistoryRecord> history;  // one record per iteration, state after the step
  StopReason reason = StopReason::max_steps;
  HistoryRecord initial;               // state before the first step (iteration 0)
  double stress_limit = 0.0;           // resolved Theta bound (mode 1)
  double volume_limit = 0.0;           // resolved volume bound (mode 2)
  double lambda = 0.0;
  double mu = 0.0;
};

/// Augmented-Lagrangian shape optimization with traction-method velocities. Throws SolveError when the
/// initial solve or the smoothing system fails.
OptimizationResult optimize(const Mesh& mesh, const Material& material, const LoadCase& loads,
                            const OptimizationProblem& problem, const SolverOptions& solver = {});

}  // namespace tracshape
