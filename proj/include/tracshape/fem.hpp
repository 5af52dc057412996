#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "tracshape/mesh.hpp"

namespace tracshape {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Isotropic linear-elastic material, SI units.
struct Material {
  double youngs_modulus = 2e11;  // Pa
  double poisson_ratio = 0.25;
  double density = 7850.0;        // kg/m^3
  double allowed_stress = 150e6;  // Pa

  /// Cast steel: E = 2e11 Pa, nu = 0.25, rho = 7850 kg/m^3, allowed 150 MPa.
  static Material paper_steel() { return {}; }

  /// Throws ValidationError when an invariant fails.
  void check() const;
};

enum class ElasticModel { plane_stress, solid };

struct DirichletCondition {
  std::string region;
  std::array<bool, 3> fixed{true, true, true};
  Vec3 value = Vec3::Zero();  // prescribed displacement, m
};

enum class NeumannKind { total_force, pressure };

/// total_force: `vector` (N) spread over the region's facets proportional to facet area.
/// pressure: `pressure` (Pa) times facet area along the outward facet normal.
struct NeumannCondition {
  std::string region;
  NeumannKind kind = NeumannKind::total_force;
  Vec3 vector = Vec3::Zero();
  double pressure = 0.0;
};

struct LoadCase {
  std::vector<DirichletCondition> dirichlet;
  std::vector<NeumannCondition> neumann;
};

/// Resolved essential conditions on global dofs (dof = node * dim + component).
struct DofConstraints {
  std::vector<Index> dofs;      // sorted, unique
  std::vector<double> values;   // parallel to dofs
};

enum class SolverMethod { automatic, direct, conjugate_gradient };

struct SolverOptions {
  SolverMethod method = SolverMethod::automatic;
  double rtol = 1e-10;
  double iteration_factor = 20.0;  // CG cap = factor * ndof
  std::size_t direct_limit = 100000;
  // Direct path only: refinement residuals use the operator rebuilt in extended precision from the
  // coordinates, so the solution is accurate for the exact (unrounded) stiffness. For verification runs.
  bool extended_operator = false;
};

struct Solution {
  Vector displacement;                // ndof
  std::vector<Eigen::Matrix3d> stress;  // per element; plane stress leaves the third row/column zero
  Vector von_mises;                   // per element, Pa
  double compliance = 0.0;            // f^T u (evaluated as 2 f^T u - u^T K u when the constraints are homogeneous)
  Vec3 reaction = Vec3::Zero();       // summed over constrained dofs, N
};

struct Response {
  double compliance = 0.0;
  double max_vm = 0.0;
  double aggregate = 0.0;
};

// ---- element level ---------------------------------------------------------

/// K_e = V_e B^T D B (V_e includes thickness in plane stress). Throws SolveError for a degenerate element.
Eigen::MatrixXd element_stiffness(std::span<const Vec3> coords, const Material& material, ElasticModel model,
                                  double thickness);

/// Voigt constitutive matrix: 3x3 plane stress [xx, yy, xy] or 6x6 solid [xx, yy, zz, yz, xz, xy].
Eigen::MatrixXd constitutive_matrix(const Material& material, ElasticModel model);

/// sqrt(1/2[(s11-s22)^2 + (s22-s33)^2 + (s33-s11)^2] + 3(s12^2 + s23^2 + s31^2))
double von_mises(const Eigen::Matrix3d& stress);

ElasticModel model_for(const Mesh& mesh);

// ---- global level ----------------------------------------------------------

/// Scatter-add of element matrices in element order; ndof = dim * nodes.
SparseMatrix assemble(const Mesh& mesh, const Material& material);

/// Consistent nodal load vector for the Neumann conditions.
Vector load_vector(const Mesh& mesh, const LoadCase& loads);

DofConstraints resolve_dirichlet(const Mesh& mesh, const LoadCase& loads);

/// Throws SolveError naming the first rigid-body mode the constraints leave free.
void check_rigid_modes(const Mesh& mesh, const DofConstraints& constraints);

/// Linear elastic system with essential dofs eliminated. The factorization (direct path) is computed once
/// and reused for every right-hand side, so adjoint solves cost one back-substitution.
/// Holds a reference to `mesh`, which must outlive the system.
class ElasticSystem {
 public:
  ElasticSystem(const Mesh& mesh, const Material& material, Vector load, DofConstraints constraints,
                SolverOptions options = {});
  ElasticSystem(const Mesh& mesh, const Material& material, const LoadCase& loads, SolverOptions options = {});
  ~ElasticSystem();
  ElasticSystem(ElasticSystem&&) noexcept;
  ElasticSystem& operator=(ElasticSystem&&) noexcept;

  const Mesh& mesh() const { return *mesh_; }
  const Material& material() const { return material_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const Vector& load() const { return load_; }
  const DofConstraints& constraints() const { return constraints_; }

  /// Full displacement vector solving K u = f on free dofs with u = prescribed on constrained dofs.
  Vector solve_displacement() const;

  /// Solves K_FF x_F = rhs_F; the result is zero on constrained dofs.
  Vector solve_homogeneous(const Vector& rhs) const;

  /// Displacement plus recovered stresses, compliance, and reactions.
  Solution solve() const;

 private:
  struct Factor;
  Vector solve_free(const Vector& rhs_free) const;
  double residual(const Vector& rhs, const Vector& x, Vector& r) const;

  const Mesh* mesh_;
  Material material_;
  SolverOptions options_;
  SparseMatrix stiffness_;
  Vector load_;
  DofConstraints constraints_;
  std::vector<Index> free_dofs_;
  std::vector<Index> free_index_;  // dof -> position in free_dofs_ or -1
  SparseMatrix reduced_;
  std::unique_ptr<Factor> factor_;
};

Solution solve_static(const Mesh& mesh, const Material& material, const LoadCase& loads,
                      const SolverOptions& options = {});

/// Element-constant stress tensors and von Mises from a displacement field.
void recover_stress(const Mesh& mesh, const Material& material, const Vector& displacement,
                    std::vector<Eigen::Matrix3d>& stress, Vector& von_mises);

/// Theta = (sum v_e (vm_e / sigma_ref)^p / sum v_e)^(1/p)
double stress_aggregate(const Mesh& mesh, const Vector& von_mises, double p, double sigma_ref);

/// Compliance, maximum von Mises, and the p-norm aggregate. Requires p >= 2 and sigma_ref > 0.
Response evaluate(const Mesh& mesh, const Solution& solution, double p, double sigma_ref);

}  // namespace tracshape
