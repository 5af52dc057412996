#include "tracshape/fem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "tracshape/elasticity.hpp"
#include "tracshape/errors.hpp"
#include "tracshape/simplex.hpp"

namespace tracshape {

void Material::check() const {
  if (!(youngs_modulus > 0.0)) throw ValidationError("Young's modulus must be positive");
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) throw ValidationError("Poisson ratio must lie in [0, 0.5)");
  if (!(density > 0.0)) throw ValidationError("density must be positive");
  if (!(allowed_stress > 0.0)) throw ValidationError("allowed stress must be positive");
}

ElasticModel model_for(const Mesh& mesh) {
  return mesh.dimension() == 2 ? ElasticModel::plane_stress : ElasticModel::solid;
}

simplex::Lame lame_parameters(const Material& m, ElasticModel model) {
  const double e = m.youngs_modulus, nu = m.poisson_ratio;
  const double shear = e / (2.0 * (1.0 + nu));
  if (model == ElasticModel::plane_stress) return {e * nu / (1.0 - nu * nu), shear};
  return {e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), shear};
}

Eigen::MatrixXd constitutive_matrix(const Material& material, ElasticModel model) {
  const auto lame = lame_parameters(material, model);
  if (model == ElasticModel::plane_stress) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d(0, 0) = d(1, 1) = lame.a + 2.0 * lame.b;
    d(0, 1) = d(1, 0) = lame.a;
    d(2, 2) = lame.b;
    return d;
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) d(i, j) = lame.a;
    d(i, i) += 2.0 * lame.b;
    d(i + 3, i + 3) = lame.b;
  }
  return d;
}

double von_mises(const Eigen::Matrix3d& s) {
  const double d01 = s(0, 0) - s(1, 1), d12 = s(1, 1) - s(2, 2), d20 = s(2, 2) - s(0, 0);
  const double shear = s(0, 1) * s(0, 1) + s(1, 2) * s(1, 2) + s(2, 0) * s(2, 0);
  return std::sqrt(0.5 * (d01 * d01 + d12 * d12 + d20 * d20) + 3.0 * shear);
}

namespace {

template <int Dim>
Eigen::MatrixXd strain_displacement(const simplex::Gradients<Dim>& g) {
  constexpr int kNodes = Dim + 1;
  if constexpr (Dim == 2) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 2 * kNodes);
    for (int a = 0; a < kNodes; ++a) {
      b(0, 2 * a) = g(0, a);
      b(1, 2 * a + 1) = g(1, a);
      b(2, 2 * a) = g(1, a);
      b(2, 2 * a + 1) = g(0, a);
    }
    return b;
  } else {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 3 * kNodes);
    for (int a = 0; a < kNodes; ++a) {
      const int c = 3 * a;
      b(0, c) = g(0, a);
      b(1, c + 1) = g(1, a);
      b(2, c + 2) = g(2, a);
      b(3, c + 1) = g(2, a);
      b(3, c + 2) = g(1, a);
      b(4, c) = g(2, a);
      b(4, c + 2) = g(0, a);
      b(5, c) = g(1, a);
      b(5, c + 1) = g(0, a);
    }
    return b;
  }
}

template <int Dim>
Eigen::MatrixXd stiffness_from_coords(const simplex::Coords<Dim>& x, const Material& material, ElasticModel model,
                                      double thickness) {
  const double measure = simplex::signed_measure<Dim>(x);
  double scale = 0.0;
  for (int i = 0; i <= Dim; ++i)
    for (int j = i + 1; j <= Dim; ++j) scale = std::max(scale, (x.col(i) - x.col(j)).norm());
  if (!(std::abs(measure) > 1e-14 * std::pow(scale, Dim))) throw SolveError("degenerate element (zero measure)");
  const double volume = std::abs(measure) * (Dim == 2 ? thickness : 1.0);
  const Eigen::MatrixXd b = strain_displacement<Dim>(simplex::gradients<Dim>(x));
  const Eigen::MatrixXd d = constitutive_matrix(material, model);
  Eigen::MatrixXd k = volume * (b.transpose() * d * b);
  // Mirror the upper triangle so the result is exactly symmetric.
  for (int i = 0; i < k.rows(); ++i)
    for (int j = 0; j < i; ++j) k(i, j) = k(j, i);
  return k;
}

template <int Dim>
Eigen::MatrixXd element_matrix(const Mesh& mesh, Index e, const Material& material) {
  try {
    return stiffness_from_coords<Dim>(simplex::gather_coords<Dim>(mesh, e), material, model_for(mesh), mesh.thickness());
  } catch (const SolveError&) {
    throw SolveError("degenerate element " + std::to_string(e) + " (zero measure)");
  }
}

const char* mode_name(int dim, int mode) {
  static const char* const k3[] = {"translation x", "translation y", "translation z",
                                   "rotation about x", "rotation about y", "rotation about z"};
  static const char* const k2[] = {"translation x", "translation y", "rotation about z"};
  return dim == 3 ? k3[mode] : k2[mode];
}

template <int Dim>
void recover_impl(const Mesh& mesh, const Material& material, const Vector& u, std::vector<Eigen::Matrix3d>& stress,
                  Vector& vm) {
  const auto lame = lame_parameters(material, model_for(mesh));
  const auto ne = static_cast<Index>(mesh.element_count());
  stress.assign(mesh.element_count(), Eigen::Matrix3d::Zero());
  vm.resize(ne);
  for (Index e = 0; e < ne; ++e) {
    const auto g = simplex::gradients<Dim>(simplex::gather_coords<Dim>(mesh, e));
    const auto ue = elasticity::gather_nodal<Dim>(mesh, e, u);
    const simplex::Tensor<Dim> h = simplex::displacement_gradient<Dim>(g, ue);
    const simplex::Tensor<Dim> eps = 0.5 * (h + h.transpose());
    Eigen::Matrix3d& s = stress[static_cast<std::size_t>(e)];
    s.topLeftCorner<Dim, Dim>() = simplex::apply_law<Dim>(lame, eps);
    vm[e] = von_mises(s);
  }
}

using Extended = long double;

/// y += K x element by element in extended precision, with K rebuilt from the coordinates (not the stored
/// double entries): (K_e x_e)_a = V sigma(x_e) g_a.
template <int Dim>
void apply_extended(const Mesh& mesh, const simplex::Lame& lame, const Vector& x, std::vector<Extended>& y) {
  using Mat = Eigen::Matrix<Extended, Dim, Dim>;
  const Extended a = lame.a, b = lame.b;
  const Extended thickness = Dim == 2 ? mesh.thickness() : 1.0;
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    const auto& conn = mesh.element(e);
    Mat j;
    for (int i = 0; i < Dim; ++i) {
      for (int k = 0; k < Dim; ++k)
        j(k, i) = static_cast<Extended>(mesh.node(conn[static_cast<std::size_t>(i + 1)])[k]) -
                  static_cast<Extended>(mesh.node(conn[0])[k]);
    }
    const Mat jinv_t = j.inverse().transpose();
    const Extended volume = j.determinant() / (Dim == 2 ? 2 : 6) * thickness;
    Mat h = Mat::Zero();
    for (int n = 1; n <= Dim; ++n) {
      Eigen::Matrix<Extended, Dim, 1> du;
      for (int k = 0; k < Dim; ++k)
        du(k) = static_cast<Extended>(x(conn[static_cast<std::size_t>(n)] * Dim + k)) -
                static_cast<Extended>(x(conn[0] * Dim + k));
      h += du * jinv_t.col(n - 1).transpose();
    }
    const Mat eps = (h + h.transpose()) / 2;
    const Mat sigma = a * eps.trace() * Mat::Identity() + 2 * b * eps;
    Eigen::Matrix<Extended, Dim, 1> first = Eigen::Matrix<Extended, Dim, 1>::Zero();
    for (int n = 1; n <= Dim; ++n) {
      const Eigen::Matrix<Extended, Dim, 1> f = volume * (sigma * jinv_t.col(n - 1));
      first -= f;
      for (int k = 0; k < Dim; ++k) y[static_cast<std::size_t>(conn[static_cast<std::size_t>(n)] * Dim + k)] += f(k);
    }
    for (int k = 0; k < Dim; ++k) y[static_cast<std::size_t>(conn[0] * Dim + k)] += first(k);
  }
}

/// u^T K u = sum_e V eps:sigma, evaluated from strains so rigid motion of an element contributes nothing.
template <int Dim>
double strain_work(const Mesh& mesh, const simplex::Lame& lame, const Vector& u) {
  Extended total = 0;
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    const auto x = simplex::gather_coords<Dim>(mesh, e);
    const auto g = simplex::gradients<Dim>(x);
    const simplex::Tensor<Dim> h = simplex::displacement_gradient<Dim>(g, elasticity::gather_nodal<Dim>(mesh, e, u));
    const simplex::Tensor<Dim> eps = 0.5 * (h + h.transpose());
    const double volume = simplex::signed_measure<Dim>(x) * (Dim == 2 ? mesh.thickness() : 1.0);
    total += static_cast<Extended>(volume * eps.cwiseProduct(simplex::apply_law<Dim>(lame, eps)).sum());
  }
  return static_cast<double>(total);
}

}  // namespace

Eigen::MatrixXd element_stiffness(std::span<const Vec3> coords, const Material& material, ElasticModel model,
                                  double thickness) {
  if (model == ElasticModel::plane_stress) {
    if (coords.size() != 3) throw ValidationError("plane-stress element needs 3 nodes");
    simplex::Coords<2> x;
    for (int a = 0; a < 3; ++a) x.col(a) = coords[static_cast<std::size_t>(a)].head<2>();
    return stiffness_from_coords<2>(x, material, model, thickness);
  }
  if (coords.size() != 4) throw ValidationError("solid element needs 4 nodes");
  simplex::Coords<3> x;
  for (int a = 0; a < 4; ++a) x.col(a) = coords[static_cast<std::size_t>(a)];
  return stiffness_from_coords<3>(x, material, model, thickness);
}

SparseMatrix assemble(const Mesh& mesh, const Material& material) {
  const int dim = mesh.dimension();
  const int nen = mesh.nodes_per_element();
  const int edofs = dim * nen;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.element_count() * static_cast<std::size_t>(edofs * edofs));
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    const Eigen::MatrixXd ke = dim == 2 ? element_matrix<2>(mesh, e, material) : element_matrix<3>(mesh, e, material);
    const auto conn = mesh.element_nodes(e);
    for (int a = 0; a < nen; ++a)
      for (int i = 0; i < dim; ++i)
        for (int b = 0; b < nen; ++b)
          for (int j = 0; j < dim; ++j)
            triplets.emplace_back(conn[static_cast<std::size_t>(a)] * dim + i, conn[static_cast<std::size_t>(b)] * dim + j,
                                  ke(a * dim + i, b * dim + j));
  }
  const auto ndof = static_cast<Eigen::Index>(mesh.dof_count());
  SparseMatrix k(ndof, ndof);
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

Vector load_vector(const Mesh& mesh, const LoadCase& loads) {
  const int dim = mesh.dimension();
  Vector f = Vector::Zero(static_cast<Eigen::Index>(mesh.dof_count()));
  for (const auto& load : loads.neumann) {
    const RegionTag& tag = mesh.region(load.region);
    if (tag.kind != RegionKind::facets)
      throw ValidationError("load region '" + load.region + "' must be a facet set");
    for (const auto& load_facet : elasticity::load_facets(mesh, tag)) {
      for (int i = 0; i < dim; ++i) {
        const Index v = load_facet.facet.nodes[static_cast<std::size_t>(i)];
        f.segment(v * dim, dim) += elasticity::nodal_share(load, load_facet).head(dim);
      }
    }
  }
  return f;
}

DofConstraints resolve_dirichlet(const Mesh& mesh, const LoadCase& loads) {
  const int dim = mesh.dimension();
  std::map<Index, double> fixed;
  for (const auto& bc : loads.dirichlet) {
    for (Index v : region_nodes(mesh, bc.region)) {
      for (int c = 0; c < dim; ++c) {
        if (!bc.fixed[static_cast<std::size_t>(c)]) continue;
        const Index dof = v * dim + c;
        auto [it, inserted] = fixed.emplace(dof, bc.value[c]);
        if (!inserted && it->second != bc.value[c])
          throw ValidationError("conflicting prescribed values at node " + std::to_string(v));
      }
    }
  }
  DofConstraints out;
  for (const auto& [dof, value] : fixed) {
    out.dofs.push_back(dof);
    out.values.push_back(value);
  }
  return out;
}

void check_rigid_modes(const Mesh& mesh, const DofConstraints& constraints) {
  const int dim = mesh.dimension();
  const int modes = dim == 3 ? 6 : 3;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& p : mesh.nodes()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double length = std::max((hi - lo).norm(), 1e-300);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(modes, modes);
  Eigen::VectorXd row(modes);
  for (Index dof : constraints.dofs) {
    const Index node = dof / dim;
    const int comp = dof % dim;
    const Vec3 r = (mesh.node(node) - center) / length;
    row.setZero();
    row(comp) = 1.0;
    if (dim == 3) {
      for (int axis = 0; axis < 3; ++axis) {
        const Vec3 field = Vec3::Unit(axis).cross(r);
        row(3 + axis) = field(comp);
      }
    } else {
      row(2) = comp == 0 ? -r.y() : r.x();
    }
    gram.noalias() += row * row.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double top = std::max(eig.eigenvalues().maxCoeff(), 1.0);
  if (eig.eigenvalues()(0) > 1e-10 * top) return;
  Eigen::Index which = 0;
  eig.eigenvectors().col(0).cwiseAbs().maxCoeff(&which);
  throw SolveError(std::string("singular system: constraints leave the rigid-body mode '") +
                   mode_name(dim, static_cast<int>(which)) + "' free");
}

struct ElasticSystem::Factor {
  bool direct = true;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
};

ElasticSystem::ElasticSystem(const Mesh& mesh, const Material& material, const LoadCase& loads, SolverOptions options)
    : ElasticSystem(mesh, material, load_vector(mesh, loads), resolve_dirichlet(mesh, loads), options) {}

ElasticSystem::ElasticSystem(const Mesh& mesh, const Material& material, Vector load, DofConstraints constraints,
                             SolverOptions options)
    : mesh_(&mesh),
      material_(material),
      options_(options),
      stiffness_(assemble(mesh, material)),
      load_(std::move(load)),
      constraints_(std::move(constraints)),
      factor_(std::make_unique<Factor>()) {
  material_.check();
  const auto ndof = static_cast<Index>(mesh.dof_count());
  if (load_.size() != ndof) throw ValidationError("load vector size does not match the mesh");
  check_rigid_modes(mesh, constraints_);

  free_index_.assign(static_cast<std::size_t>(ndof), 0);
  for (Index d : constraints_.dofs) free_index_[static_cast<std::size_t>(d)] = -1;
  for (Index d = 0; d < ndof; ++d) {
    if (free_index_[static_cast<std::size_t>(d)] == -1) continue;
    free_index_[static_cast<std::size_t>(d)] = static_cast<Index>(free_dofs_.size());
    free_dofs_.push_back(d);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(stiffness_.nonZeros()));
  for (Eigen::Index col = 0; col < stiffness_.outerSize(); ++col) {
    const Index fc = free_index_[static_cast<std::size_t>(col)];
    if (fc < 0) continue;
    for (SparseMatrix::InnerIterator it(stiffness_, col); it; ++it) {
      const Index fr = free_index_[static_cast<std::size_t>(it.row())];
      if (fr >= 0) triplets.emplace_back(fr, fc, it.value());
    }
  }
  const auto nfree = static_cast<Eigen::Index>(free_dofs_.size());
  reduced_.resize(nfree, nfree);
  reduced_.setFromTriplets(triplets.begin(), triplets.end());
  if (nfree == 0) return;

  const bool direct = options_.method == SolverMethod::direct ||
                      (options_.method == SolverMethod::automatic &&
                       static_cast<std::size_t>(nfree) <= options_.direct_limit);
  factor_->direct = direct;
  if (direct) {
    factor_->ldlt.compute(reduced_);
    if (factor_->ldlt.info() != Eigen::Success) throw SolveError("singular system: factorization failed");
    const Vector& pivots = factor_->ldlt.vectorD();
    if (!(pivots.minCoeff() > 1e-13 * pivots.cwiseAbs().maxCoeff()))
      throw SolveError("singular system: stiffness is not positive definite (disconnected or unconstrained part)");
  } else {
    factor_->cg.setTolerance(options_.rtol);
    factor_->cg.setMaxIterations(static_cast<Eigen::Index>(options_.iteration_factor * static_cast<double>(ndof)));
    factor_->cg.compute(reduced_);
  }
}

ElasticSystem::~ElasticSystem() = default;
ElasticSystem::ElasticSystem(ElasticSystem&&) noexcept = default;
ElasticSystem& ElasticSystem::operator=(ElasticSystem&&) noexcept = default;

// r = rhs - K x accumulated in extended precision (optionally with K itself rebuilt in extended precision).
// Returns the rounding floor 32 eps ||(|K| |x|)||, the residual that storing x in double alone can produce.
double ElasticSystem::residual(const Vector& rhs, const Vector& x, Vector& r) const {
  const auto n = static_cast<std::size_t>(rhs.size());
  std::vector<Extended> acc(n), mag(n, 0.0L);
  for (std::size_t i = 0; i < n; ++i) acc[i] = rhs(static_cast<Eigen::Index>(i));
  if (options_.extended_operator) {
    Vector full = Vector::Zero(static_cast<Eigen::Index>(free_index_.size()));
    for (std::size_t i = 0; i < n; ++i) full(free_dofs_[i]) = x(static_cast<Eigen::Index>(i));
    std::vector<Extended> y(free_index_.size(), 0.0L);
    const auto lame = lame_parameters(material_, model_for(*mesh_));
    if (mesh_->dimension() == 3) {
      apply_extended<3>(*mesh_, lame, full, y);
    } else {
      apply_extended<2>(*mesh_, lame, full, y);
    }
    for (std::size_t i = 0; i < n; ++i) acc[i] -= y[static_cast<std::size_t>(free_dofs_[i])];
  }
  for (Eigen::Index col = 0; col < reduced_.outerSize(); ++col) {
    const Extended xc = x(col);
    for (SparseMatrix::InnerIterator it(reduced_, col); it; ++it) {
      const auto row = static_cast<std::size_t>(it.row());
      if (!options_.extended_operator) acc[row] -= static_cast<Extended>(it.value()) * xc;
      mag[row] += std::abs(static_cast<Extended>(it.value()) * xc);
    }
  }
  r.resize(rhs.size());
  double floor = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r(static_cast<Eigen::Index>(i)) = static_cast<double>(acc[i]);
    floor += static_cast<double>(mag[i] * mag[i]);
  }
  return 32.0 * std::numeric_limits<double>::epsilon() * std::sqrt(floor);
}

Vector ElasticSystem::solve_free(const Vector& rhs) const {
  const double rhs_norm = rhs.norm();
  if (rhs.size() == 0 || rhs_norm == 0.0) return Vector::Zero(rhs.size());
  if (factor_->direct) {
    Vector x = factor_->ldlt.solve(rhs);
    Vector r;
    double floor = residual(rhs, x, r);
    // Mixed-precision refinement: corrections shrink by roughly eps * cond per sweep until x is accurate to
    // working precision. The residual target alone stops too early when it sits below the rounding floor.
    for (int sweep = 0; sweep < 8 && r.norm() > options_.rtol * rhs_norm; ++sweep) {
      const Vector dx = factor_->ldlt.solve(r);
      x += dx;
      floor = residual(rhs, x, r);
      if (dx.norm() <= 4.0 * std::numeric_limits<double>::epsilon() * x.norm()) break;
    }
    if (r.norm() > std::max(options_.rtol * rhs_norm, floor)) {
      std::ostringstream os;
      os << "direct solve residual " << r.norm() / rhs_norm << " exceeds rtol " << options_.rtol;
      throw SolveError(os.str());
    }
    return x;
  }
  Vector x = factor_->cg.solve(rhs);
  if (factor_->cg.info() != Eigen::Success) {
    std::ostringstream os;
    os << "conjugate gradients did not converge within " << factor_->cg.maxIterations() << " iterations (residual "
       << factor_->cg.error() << ")";
    throw SolveError(os.str());
  }
  return x;
}

Vector ElasticSystem::solve_homogeneous(const Vector& rhs) const {
  Vector rhs_free(static_cast<Eigen::Index>(free_dofs_.size()));
  for (std::size_t i = 0; i < free_dofs_.size(); ++i) rhs_free(static_cast<Eigen::Index>(i)) = rhs(free_dofs_[i]);
  const Vector x_free = solve_free(rhs_free);
  Vector x = Vector::Zero(rhs.size());
  for (std::size_t i = 0; i < free_dofs_.size(); ++i) x(free_dofs_[i]) = x_free(static_cast<Eigen::Index>(i));
  return x;
}

Vector ElasticSystem::solve_displacement() const {
  Vector prescribed = Vector::Zero(load_.size());
  for (std::size_t i = 0; i < constraints_.dofs.size(); ++i) prescribed(constraints_.dofs[i]) = constraints_.values[i];
  Vector rhs = load_;
  if (prescribed.squaredNorm() > 0.0) rhs -= stiffness_ * prescribed;
  Vector u = solve_homogeneous(rhs);
  for (std::size_t i = 0; i < constraints_.dofs.size(); ++i) u(constraints_.dofs[i]) = constraints_.values[i];
  return u;
}

Solution ElasticSystem::solve() const {
  Solution sol;
  sol.displacement = solve_displacement();
  recover_stress(*mesh_, material_, sol.displacement, sol.stress, sol.von_mises);
  const bool homogeneous = std::all_of(constraints_.values.begin(), constraints_.values.end(),
                                      [](double v) { return v == 0.0; });
  if (homogeneous) {
    // Equal to f^T u at equilibrium; first-order errors in u cancel.
    const auto lame = lame_parameters(material_, model_for(*mesh_));
    const double work = mesh_->dimension() == 3 ? strain_work<3>(*mesh_, lame, sol.displacement)
                                                : strain_work<2>(*mesh_, lame, sol.displacement);
    sol.compliance = 2.0 * load_.dot(sol.displacement) - work;
  } else {
    sol.compliance = load_.dot(sol.displacement);
  }
  const int dim = mesh_->dimension();
  const Vector internal = stiffness_ * sol.displacement;
  for (Index dof : constraints_.dofs) sol.reaction(dof % dim) += internal(dof) - load_(dof);
  return sol;
}

Solution solve_static(const Mesh& mesh, const Material& material, const LoadCase& loads, const SolverOptions& options) {
  return ElasticSystem(mesh, material, loads, options).solve();
}

void recover_stress(const Mesh& mesh, const Material& material, const Vector& displacement,
                    std::vector<Eigen::Matrix3d>& stress, Vector& von_mises_out) {
  if (displacement.size() != static_cast<Eigen::Index>(mesh.dof_count()))
    throw ValidationError("displacement length does not match the mesh dof count");
  if (mesh.dimension() == 2) recover_impl<2>(mesh, material, displacement, stress, von_mises_out);
  else recover_impl<3>(mesh, material, displacement, stress, von_mises_out);
}

double stress_aggregate(const Mesh& mesh, const Vector& vm, double p, double sigma_ref) {
  if (!(sigma_ref > 0.0)) throw ValidationError("sigma_ref must be positive");
  if (!(p >= 2.0)) throw ValidationError("aggregation exponent must be >= 2");
  if (vm.size() != static_cast<Eigen::Index>(mesh.element_count()))
    throw ValidationError("von Mises field does not match the element count");
  const double top = vm.maxCoeff();
  if (top <= 0.0) return 0.0;
  double weighted = 0.0, total = 0.0;
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    const double v = element_volume(mesh, e);
    weighted += v * std::pow(vm[e] / top, p);
    total += v;
  }
  return top / sigma_ref * std::pow(weighted / total, 1.0 / p);
}

Response evaluate(const Mesh& mesh, const Solution& solution, double p, double sigma_ref) {
  Response r;
  r.compliance = solution.compliance;
  r.aggregate = stress_aggregate(mesh, solution.von_mises, p, sigma_ref);
  r.max_vm = solution.von_mises.size() ? solution.von_mises.maxCoeff() : 0.0;
  return r;
}

}  // namespace tracshape
