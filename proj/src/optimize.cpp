#include "tracshape/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "tracshape/errors.hpp"

namespace tracshape {

namespace {

bool acceptable_geometry(const Mesh& mesh, double quality_floor) {
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    if (!(signed_measure(mesh, e) > 0.0)) return false;
    if (element_quality(mesh, e) < quality_floor) return false;
  }
  return true;
}

bool sorted_unique(const std::vector<Index>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](Index a, Index b) { return a >= b; }) == v.end();
}

/// A solved design.
struct Evaluation {
  std::unique_ptr<Mesh> mesh;
  std::unique_ptr<ElasticSystem> system;
  Solution solution;
  Response response;
  double volume = 0.0;
  double min_quality = 0.0;
  double f = 0.0;  // normalized objective
  double g = 0.0;  // normalized constraint, feasible when <= 0
};

struct Scales {
  OptimizationMode mode;
  double p, sigma_ref;
  double volume0 = 1.0, compliance0 = 1.0;
  double stress_limit = 1.0, volume_limit = 1.0;
};

Evaluation evaluate_design(const Mesh& mesh, const Material& material, const LoadCase& loads,
                           const SolverOptions& solver, const Scales& scales) {
  Evaluation out;
  out.mesh = std::make_unique<Mesh>(mesh);
  out.system = std::make_unique<ElasticSystem>(*out.mesh, material, loads, solver);
  out.solution = out.system->solve();
  out.response = evaluate(*out.mesh, out.solution, scales.p, scales.sigma_ref);
  const MeshReport report = measure(*out.mesh);
  out.volume = report.volume;
  out.min_quality = report.min_quality;
  if (scales.mode == OptimizationMode::volume_min_stress_constrained) {
    out.f = out.volume / scales.volume0;
    out.g = out.response.aggregate / scales.stress_limit - 1.0;
  } else {
    out.f = out.response.compliance / scales.compliance0;
    out.g = out.volume / scales.volume_limit - 1.0;
  }
  return out;
}

/// Powell-Hestenes-Rockafellar merit for an inequality constraint g <= 0.
double merit(double f, double g, double lambda, double mu) {
  if (g >= -lambda / mu) return f + lambda * g + 0.5 * mu * g * g;
  return f - lambda * lambda / (2.0 * mu);
}

HistoryRecord make_record(int iteration, const Evaluation& e, double step_size, bool accepted) {
  HistoryRecord r;
  r.iteration = iteration;
  r.volume = e.volume;
  r.compliance = e.response.compliance;
  r.max_vm = e.response.max_vm;
  r.aggregate = e.response.aggregate;
  r.step_size = step_size;
  r.constraint_violation = std::max(0.0, e.g);
  r.min_quality = e.min_quality;
  r.accepted = accepted;
  return r;
}

}  // namespace

StepResult step(const Mesh& mesh, const NodeField& velocity, const StepControl& control, const MeritFunction& merit_fn,
                double current_merit) {
  if (velocity.size() != mesh.node_count()) throw ValidationError("velocity field does not match the mesh");
  const double vmax = max_norm(velocity);
  if (!std::isfinite(vmax)) throw ValidationError("velocity field is not finite");
  StepResult out{mesh, true, 0.0, 0.0, 0};
  if (vmax == 0.0) return out;
  const double edge = min_edge_length(mesh);
  double t = control.move_cap * edge / vmax;
  const int dim = mesh.dimension();
  for (int halvings = 0; halvings <= control.max_halvings; ++halvings, t *= 0.5) {
    std::vector<Vec3> nodes = mesh.nodes();
    for (std::size_t v = 0; v < nodes.size(); ++v) {
      for (int c = 0; c < dim; ++c) nodes[v][c] += t * velocity[v][c];
    }
    Mesh candidate = mesh.with_nodes(std::move(nodes));
    if (!acceptable_geometry(candidate, control.quality_floor)) continue;
    if (merit_fn) {
      const std::optional<double> m = merit_fn(candidate);
      if (!m || !(*m < current_merit)) continue;
    }
    return {std::move(candidate), true, t * vmax / edge, t, halvings};
  }
  out.accepted = false;
  out.halvings = control.max_halvings;
  return out;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::max_steps:
      return "max_steps";
    case StopReason::volume_cap:
      return "volume_cap";
    case StopReason::stalled:
      return "stalled";
  }
  return "unknown";
}

void OptimizationProblem::check(const Mesh& mesh) const {
  const auto n = static_cast<Index>(mesh.node_count());
  for (const auto* set : {&design, &frozen}) {
    if (!sorted_unique(*set)) throw ValidationError("design and frozen node sets must be sorted and unique");
    if (!set->empty() && (set->front() < 0 || set->back() >= n)) throw ValidationError("node set index out of range");
  }
  std::vector<Index> both;
  std::set_intersection(design.begin(), design.end(), frozen.begin(), frozen.end(), std::back_inserter(both));
  if (!both.empty()) throw ValidationError("node " + std::to_string(both.front()) + " is both design and frozen");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
  if (!(mu > 0.0)) throw ValidationError("mu must be positive");
  if (!(mu_growth >= 1.0)) throw ValidationError("mu growth must be at least 1");
  if (!(p >= 2.0)) throw ValidationError("aggregation exponent must be >= 2");
  if (max_steps < 0) throw ValidationError("max_steps must be non-negative");
  if (volume_reduction_cap && !(*volume_reduction_cap >= 0.0 && *volume_reduction_cap < 1.0))
    throw ValidationError("volume_reduction_cap must lie in [0, 1)");
  if (stress_limit && !(*stress_limit > 0.0)) throw ValidationError("stress_limit must be positive");
  if (volume_limit && !(*volume_limit > 0.0)) throw ValidationError("volume_limit must be positive");
  if (sigma_ref && !(*sigma_ref > 0.0)) throw ValidationError("sigma_ref must be positive");
  if (mode == OptimizationMode::volume_min_stress_constrained && volume_limit)
    throw ValidationError("volume_limit does not apply to the stress-constrained mode");
  if (mode == OptimizationMode::compliance_min_volume_constrained && stress_limit)
    throw ValidationError("stress_limit does not apply to the volume-constrained mode");
  if (!(step.move_cap > 0.0)) throw ValidationError("move_cap must be positive");
  if (!(step.quality_floor >= 0.0 && step.quality_floor < 1.0)) throw ValidationError("quality_floor must lie in [0, 1)");
  if (step.max_halvings < 0) throw ValidationError("max_halvings must be non-negative");
}

OptimizationResult optimize(const Mesh& mesh, const Material& material, const LoadCase& loads,
                            const OptimizationProblem& problem, const SolverOptions& solver) {
  problem.check(mesh);
  material.check();
  Scales scales{problem.mode, problem.p, problem.sigma_ref.value_or(material.allowed_stress)};
  Evaluation current = evaluate_design(mesh, material, loads, solver, scales);
  scales.volume0 = current.volume;
  scales.compliance0 = current.response.compliance;
  scales.stress_limit = problem.stress_limit.value_or(current.response.aggregate);
  scales.volume_limit = problem.volume_limit.value_or(current.volume);
  if (problem.mode == OptimizationMode::volume_min_stress_constrained && !(scales.stress_limit > 0.0))
    throw SolveError("initial design carries no stress; the stress constraint is undefined");
  if (problem.mode == OptimizationMode::compliance_min_volume_constrained && !(scales.compliance0 > 0.0))
    throw SolveError("initial compliance is zero; nothing to minimize");
  current = evaluate_design(mesh, material, loads, solver, scales);

  OptimizationResult result{mesh, {}, StopReason::max_steps, make_record(0, current, 0.0, true),
                            scales.stress_limit, scales.volume_limit, problem.lambda, problem.mu};
  double lambda = problem.lambda, mu = problem.mu;
  int rejections = 0, violated = 0;

  std::vector<Index> movable;
  if (problem.support == GradientSupport::design) {
    movable = problem.design;
  } else {
    for (Index v = 0; v < static_cast<Index>(mesh.node_count()); ++v)
      if (!std::binary_search(problem.frozen.begin(), problem.frozen.end(), v)) movable.push_back(v);
  }

  for (int iteration = 1; iteration <= problem.max_steps; ++iteration) {
    const Mesh& shape = *current.mesh;
    NodeField grad_f, grad_g;
    if (problem.mode == OptimizationMode::volume_min_stress_constrained) {
      grad_f = volume_gradient(shape);
      grad_g = stress_aggregate_gradient(*current.system, current.solution, loads, scales.p, scales.sigma_ref);
      for (auto& v : grad_f) v /= scales.volume0;
      for (auto& v : grad_g) v /= scales.stress_limit;
    } else {
      grad_f = compliance_gradient(*current.system, current.solution, loads);
      grad_g = volume_gradient(shape);
      for (auto& v : grad_f) v /= scales.compliance0;
      for (auto& v : grad_g) v /= scales.volume_limit;
    }
    const double weight = std::max(0.0, lambda + mu * current.g);
    NodeField raw(grad_f.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = grad_f[i] + weight * grad_g[i];
    const NodeField velocity =
        traction_smooth(shape, restrict_field(raw, movable), problem.frozen, problem.smoothing_poisson_ratio);

    std::optional<Evaluation> candidate;
    const MeritFunction merit_fn = [&](const Mesh& m) -> std::optional<double> {
      try {
        candidate = evaluate_design(m, material, loads, solver, scales);
      } catch (const SolveError&) {
        candidate.reset();
        return std::nullopt;
      }
      return merit(candidate->f, candidate->g, lambda, mu);
    };
    const double before = merit(current.f, current.g, lambda, mu);
    const StepResult s = step(shape, velocity, problem.step, merit_fn, before);
    const bool moved = s.accepted && s.t > 0.0;
    if (moved) current = std::move(*candidate);
    HistoryRecord record = make_record(iteration, current, s.accepted ? s.step_size : 0.0, s.accepted);
    record.merit_before = before;
    record.merit_after = merit(current.f, current.g, lambda, mu);
    result.history.push_back(record);

    lambda = std::max(0.0, lambda + mu * current.g);
    violated = current.g > 0.01 ? violated + 1 : 0;
    if (violated >= 2) {
      mu *= problem.mu_growth;
      violated = 0;
    }

    if (moved && problem.volume_reduction_cap &&
        current.volume <= (1.0 - *problem.volume_reduction_cap) * scales.volume0) {
      result.reason = StopReason::volume_cap;
      break;
    }
    rejections = s.accepted ? 0 : rejections + 1;
    if (rejections >= 3) {
      result.reason = StopReason::stalled;
      break;
    }
  }
  result.mesh = *current.mesh;
  result.lambda = lambda;
  result.mu = mu;
  return result;
}

}  // namespace tracshape
