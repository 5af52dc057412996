#pragma once

#include <span>
#include <vector>

#include "tracshape/fem.hpp"
#include "tracshape/mesh.hpp"

namespace tracshape {

/// One vector per node; the z component is zero for 2D meshes.
using NodeField = std::vector<Vec3>;

NodeField zero_field(const Mesh& mesh);

/// Keeps the entries of `nodes` (sorted), zeroes the rest.
NodeField restrict_field(const NodeField& field, std::span<const Index> nodes);

double dot(const NodeField& a, const NodeField& b);
double max_norm(const NodeField& field);

/// d(total volume)/dx. The second form zeroes nodes outside `movable`.
NodeField volume_gradient(const Mesh& mesh);
NodeField volume_gradient(const Mesh& mesh, std::span<const Index> movable);

/// d(a^T K(x) b)/dx with a and b held fixed (length ndof).
NodeField stiffness_term(const Mesh& mesh, const Material& material, const Vector& a, const Vector& b);

/// d(w^T f(x))/dx with w held fixed: pressure loads follow the facet area vectors, total-force loads follow
/// the facet area fractions.
NodeField load_term(const Mesh& mesh, const LoadCase& loads, const Vector& w);

/// Exact derivative of f^T u for the system with eliminated essential dofs.
NodeField compliance_gradient(const ElasticSystem& system, const Solution& solution, const LoadCase& loads);
NodeField compliance_gradient(const Mesh& mesh, const Material& material, const Solution& solution,
                              const LoadCase& loads);

/// Exact derivative of the p-norm aggregate (see stress_aggregate) through one adjoint solve.
NodeField stress_aggregate_gradient(const ElasticSystem& system, const Solution& solution, const LoadCase& loads,
                                    double p, double sigma_ref);
NodeField stress_aggregate_gradient(const Mesh& mesh, const Material& material, const Solution& solution,
                                    const LoadCase& loads, double p, double sigma_ref);

/// Traction method: solves K_s V = -raw with K_s the elasticity operator of the current mesh (E = 1,
/// nu = `poisson_ratio`) and V = 0 on `frozen`. Throws SolveError naming the rigid mode when the frozen set
/// does not hold the pseudo-body.
NodeField traction_smooth(const Mesh& mesh, const NodeField& raw, std::span<const Index> frozen,
                          double poisson_ratio = 0.3);

enum class Functional { volume, compliance, aggregate };

struct FdContext {
  Material material;
  LoadCase loads;
  double p = 8.0;
  double sigma_ref = 150e6;
  // Solve to the rounding floor: residual noise in J is divided by h in the difference quotient.
  SolverOptions solver = {SolverMethod::direct, 1e-15, 20.0, 100000, true};
};

/// |(J(x + h d) - J(x - h d)) - g . (x+ - x-)| / max(|g . (x+ - x-)|, 1e-30), where x+- are the perturbed
/// coordinates as stored. Throws ValidationError when a perturbed mesh is invalid.
double fd_check(const Mesh& mesh, Functional functional, const FdContext& context, const NodeField& direction,
                double h);

/// The functional and its gradient at the given mesh.
double functional_value(const Mesh& mesh, Functional functional, const FdContext& context);
NodeField functional_gradient(const Mesh& mesh, Functional functional, const FdContext& context);

}  // namespace tracshape
