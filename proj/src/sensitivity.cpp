#include "tracshape/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "tracshape/elasticity.hpp"
#include "tracshape/errors.hpp"
#include "tracshape/simplex.hpp"

namespace tracshape {

namespace {

template <int Dim>
double element_size(const Mesh& mesh, double measure) {
  return Dim == 2 ? measure * mesh.thickness() : measure;
}

template <int Dim>
Vec3 lift(const Eigen::Matrix<double, Dim, 1>& v) {
  Vec3 out = Vec3::Zero();
  out.head<Dim>() = v;
  return out;
}

Vector flatten(const Mesh& mesh, const NodeField& field) {
  const int dim = mesh.dimension();
  Vector out(static_cast<Eigen::Index>(mesh.dof_count()));
  for (std::size_t v = 0; v < field.size(); ++v) out.segment(static_cast<Eigen::Index>(v) * dim, dim) = field[v].head(dim);
  return out;
}

NodeField unflatten(const Mesh& mesh, const Vector& x) {
  const int dim = mesh.dimension();
  NodeField out = zero_field(mesh);
  for (std::size_t v = 0; v < out.size(); ++v) out[v].head(dim) = x.segment(static_cast<Eigen::Index>(v) * dim, dim);
  return out;
}

void add(NodeField& a, const NodeField& b, double scale = 1.0) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

template <int Dim>
void volume_impl(const Mesh& mesh, NodeField& out) {
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    const auto x = simplex::gather_coords<Dim>(mesh, e);
    const double v = element_size<Dim>(mesh, simplex::signed_measure<Dim>(x));
    const auto g = simplex::gradients<Dim>(x);
    const auto& conn = mesh.element(e);
    for (int a = 0; a <= Dim; ++a) out[static_cast<std::size_t>(conn[static_cast<std::size_t>(a)])] += lift<Dim>(v * g.col(a));
  }
}

template <int Dim>
void stiffness_impl(const Mesh& mesh, const Material& material, const Vector& a, const Vector& b, NodeField& out) {
  const auto lame = lame_parameters(material, model_for(mesh));
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    const auto x = simplex::gather_coords<Dim>(mesh, e);
    const double v = element_size<Dim>(mesh, simplex::signed_measure<Dim>(x));
    const auto g = simplex::gradients<Dim>(x);
    const simplex::Tensor<Dim> ha = simplex::displacement_gradient<Dim>(g, elasticity::gather_nodal<Dim>(mesh, e, a));
    const simplex::Tensor<Dim> hb = simplex::displacement_gradient<Dim>(g, elasticity::gather_nodal<Dim>(mesh, e, b));
    const simplex::Tensor<Dim> sa = simplex::apply_law<Dim>(lame, 0.5 * (ha + ha.transpose()));
    const simplex::Tensor<Dim> sb = simplex::apply_law<Dim>(lame, 0.5 * (hb + hb.transpose()));
    const double energy = (0.5 * (ha + ha.transpose())).cwiseProduct(sb).sum();
    const simplex::Tensor<Dim> m = energy * simplex::Tensor<Dim>::Identity() - ha.transpose() * sb - hb.transpose() * sa;
    const auto& conn = mesh.element(e);
    for (int n = 0; n <= Dim; ++n) out[static_cast<std::size_t>(conn[static_cast<std::size_t>(n)])] += lift<Dim>(v * m * g.col(n));
  }
}

/// Adds d(w . a_f)/dx for the facet area vector a_f.
void add_area_vector_gradient(const Mesh& mesh, const BoundaryFacet& f, const Vec3& w, NodeField& out) {
  if (mesh.dimension() == 3) {
    const Vec3& x0 = mesh.node(f.nodes[0]);
    const Vec3& x1 = mesh.node(f.nodes[1]);
    const Vec3& x2 = mesh.node(f.nodes[2]);
    out[static_cast<std::size_t>(f.nodes[0])] += 0.5 * (x1 - x2).cross(w);
    out[static_cast<std::size_t>(f.nodes[1])] += 0.5 * (x2 - x0).cross(w);
    out[static_cast<std::size_t>(f.nodes[2])] += 0.5 * (x0 - x1).cross(w);
    return;
  }
  const double t = mesh.thickness();
  out[static_cast<std::size_t>(f.nodes[1])] += t * Vec3(-w.y(), w.x(), 0.0);
  out[static_cast<std::size_t>(f.nodes[0])] += t * Vec3(w.y(), -w.x(), 0.0);
}

template <int Dim>
NodeField aggregate_impl(const ElasticSystem& system, const Solution& solution, const LoadCase& loads, double p,
                         double sigma_ref) {
  const Mesh& mesh = system.mesh();
  if (!(sigma_ref > 0.0)) throw ValidationError("sigma_ref must be positive");
  if (!(p >= 2.0)) throw ValidationError("aggregation exponent must be >= 2");
  const auto ne = static_cast<Index>(mesh.element_count());
  if (solution.von_mises.size() != ne || solution.displacement.size() != static_cast<Eigen::Index>(mesh.dof_count()))
    throw ValidationError("solution does not match the mesh");
  const double rmax = solution.von_mises.maxCoeff() / sigma_ref;
  if (!(rmax > 0.0)) throw ValidationError("stress aggregate gradient needs a nonzero stress field");

  std::vector<double> volume(static_cast<std::size_t>(ne)), scaled(static_cast<std::size_t>(ne));
  double total = 0.0, sum = 0.0;
  for (Index e = 0; e < ne; ++e) {
    const double v = element_size<Dim>(mesh, simplex::signed_measure<Dim>(simplex::gather_coords<Dim>(mesh, e)));
    const double s = solution.von_mises(e) / sigma_ref / rmax;
    volume[static_cast<std::size_t>(e)] = v;
    scaled[static_cast<std::size_t>(e)] = s;
    total += v;
    sum += v * std::pow(s, p);
  }
  const double theta = rmax * std::pow(sum / total, 1.0 / p);

  const auto lame = lame_parameters(system.material(), model_for(mesh));
  NodeField explicit_term = zero_field(mesh);
  Vector rhs = Vector::Zero(static_cast<Eigen::Index>(mesh.dof_count()));
  for (Index e = 0; e < ne; ++e) {
    const auto i = static_cast<std::size_t>(e);
    const double v = volume[i], s = scaled[i];
    const auto x = simplex::gather_coords<Dim>(mesh, e);
    const auto g = simplex::gradients<Dim>(x);
    const simplex::Tensor<Dim> h =
        simplex::displacement_gradient<Dim>(g, elasticity::gather_nodal<Dim>(mesh, e, solution.displacement));
    const simplex::Tensor<Dim> sigma = solution.stress[i].topLeftCorner<Dim, Dim>();
    // d(vm^2) = Q : d(sigma), and Q : C : d(eps) = T : d(H).
    const simplex::Tensor<Dim> q = 3.0 * sigma - sigma.trace() * simplex::Tensor<Dim>::Identity();
    const simplex::Tensor<Dim> t = simplex::apply_law<Dim>(lame, q);
    const double c = theta * v * std::pow(s, p - 2.0) / (2.0 * sum * rmax * rmax * sigma_ref * sigma_ref);
    const double weight = theta / p * (std::pow(s, p) / sum - 1.0 / total) * v;
    const simplex::Tensor<Dim> ht = h.transpose() * t;
    const auto& conn = mesh.element(e);
    for (int n = 0; n <= Dim; ++n) {
      const Index node = conn[static_cast<std::size_t>(n)];
      explicit_term[static_cast<std::size_t>(node)] += lift<Dim>(weight * g.col(n) - c * ht * g.col(n));
      rhs.segment<Dim>(node * Dim) += c * t * g.col(n);
    }
  }
  const Vector lambda = system.solve_homogeneous(rhs);
  NodeField out = explicit_term;
  add(out, load_term(mesh, loads, lambda));
  add(out, stiffness_term(mesh, system.material(), lambda, solution.displacement), -1.0);
  return out;
}

}  // namespace

NodeField zero_field(const Mesh& mesh) { return NodeField(mesh.node_count(), Vec3::Zero()); }

NodeField restrict_field(const NodeField& field, std::span<const Index> nodes) {
  NodeField out(field.size(), Vec3::Zero());
  for (Index v : nodes) out[static_cast<std::size_t>(v)] = field[static_cast<std::size_t>(v)];
  return out;
}

double dot(const NodeField& a, const NodeField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
  return s;
}

double max_norm(const NodeField& field) {
  double m = 0.0;
  for (const Vec3& v : field) m = std::max(m, v.norm());
  return m;
}

NodeField volume_gradient(const Mesh& mesh) {
  NodeField out = zero_field(mesh);
  if (mesh.dimension() == 3) {
    volume_impl<3>(mesh, out);
  } else {
    volume_impl<2>(mesh, out);
  }
  return out;
}

NodeField volume_gradient(const Mesh& mesh, std::span<const Index> movable) {
  return restrict_field(volume_gradient(mesh), movable);
}

NodeField stiffness_term(const Mesh& mesh, const Material& material, const Vector& a, const Vector& b) {
  NodeField out = zero_field(mesh);
  if (mesh.dimension() == 3) {
    stiffness_impl<3>(mesh, material, a, b, out);
  } else {
    stiffness_impl<2>(mesh, material, a, b, out);
  }
  return out;
}

NodeField load_term(const Mesh& mesh, const LoadCase& loads, const Vector& w) {
  const int dim = mesh.dimension();
  NodeField out = zero_field(mesh);
  for (const auto& load : loads.neumann) {
    const RegionTag& tag = mesh.region(load.region);
    if (tag.kind != RegionKind::facets) throw ValidationError("load region '" + load.region + "' must be a facet set");
    const auto facets = elasticity::load_facets(mesh, tag);
    std::vector<Vec3> weight(facets.size(), Vec3::Zero());
    for (std::size_t i = 0; i < facets.size(); ++i) {
      for (int a = 0; a < dim; ++a) weight[i].head(dim) += w.segment(facets[i].facet.nodes[static_cast<std::size_t>(a)] * dim, dim);
      weight[i] /= static_cast<double>(dim);
    }
    if (load.kind == NeumannKind::pressure) {
      for (std::size_t i = 0; i < facets.size(); ++i)
        add_area_vector_gradient(mesh, facets[i].facet, load.pressure * weight[i], out);
      continue;
    }
    if (facets.empty()) continue;
    const double total = facets.front().region_area;
    if (!(total > 0.0)) throw ValidationError("load region '" + load.region + "' has zero area");
    double s = 0.0;
    for (std::size_t i = 0; i < facets.size(); ++i) s += load.vector.dot(weight[i]) * facets[i].area_vector.norm();
    for (std::size_t i = 0; i < facets.size(); ++i) {
      const double c = load.vector.dot(weight[i]) / total - s / (total * total);
      add_area_vector_gradient(mesh, facets[i].facet, c * facets[i].area_vector.normalized(), out);
    }
  }
  return out;
}

NodeField compliance_gradient(const ElasticSystem& system, const Solution& solution, const LoadCase& loads) {
  const Mesh& mesh = system.mesh();
  if (solution.displacement.size() != static_cast<Eigen::Index>(mesh.dof_count()))
    throw ValidationError("solution does not match the mesh");
  const auto& values = system.constraints().values;
  const bool homogeneous = std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
  const Vector lambda = homogeneous ? solution.displacement : system.solve_homogeneous(system.load());
  NodeField out = load_term(mesh, loads, solution.displacement);
  add(out, load_term(mesh, loads, lambda));
  add(out, stiffness_term(mesh, system.material(), lambda, solution.displacement), -1.0);
  return out;
}

NodeField compliance_gradient(const Mesh& mesh, const Material& material, const Solution& solution,
                              const LoadCase& loads) {
  const ElasticSystem system(mesh, material, loads);
  return compliance_gradient(system, solution, loads);
}

NodeField stress_aggregate_gradient(const ElasticSystem& system, const Solution& solution, const LoadCase& loads,
                                    double p, double sigma_ref) {
  if (system.mesh().dimension() == 3) return aggregate_impl<3>(system, solution, loads, p, sigma_ref);
  return aggregate_impl<2>(system, solution, loads, p, sigma_ref);
}

NodeField stress_aggregate_gradient(const Mesh& mesh, const Material& material, const Solution& solution,
                                    const LoadCase& loads, double p, double sigma_ref) {
  const ElasticSystem system(mesh, material, loads);
  return stress_aggregate_gradient(system, solution, loads, p, sigma_ref);
}

NodeField traction_smooth(const Mesh& mesh, const NodeField& raw, std::span<const Index> frozen, double poisson_ratio) {
  if (raw.size() != mesh.node_count()) throw ValidationError("gradient field does not match the mesh");
  for (const Vec3& g : raw)
    if (!g.allFinite()) throw ValidationError("gradient field is not finite");
  Material pseudo;
  pseudo.youngs_modulus = 1.0;
  pseudo.poisson_ratio = poisson_ratio;
  const int dim = mesh.dimension();
  DofConstraints constraints;
  for (Index v : frozen) {
    for (int c = 0; c < dim; ++c) constraints.dofs.push_back(v * dim + c);
  }
  std::sort(constraints.dofs.begin(), constraints.dofs.end());
  constraints.dofs.erase(std::unique(constraints.dofs.begin(), constraints.dofs.end()), constraints.dofs.end());
  constraints.values.assign(constraints.dofs.size(), 0.0);
  const Vector load = -flatten(mesh, raw);
  try {
    const ElasticSystem system(mesh, pseudo, load, constraints);
    return unflatten(mesh, system.solve_homogeneous(load));
  } catch (const SolveError& e) {
    throw SolveError(std::string("traction smoothing: ") + e.what());
  }
}

double functional_value(const Mesh& mesh, Functional functional, const FdContext& context) {
  if (functional == Functional::volume) {
    // Determinants in extended precision: the difference quotient divides this rounding by h.
    long double total = 0.0L;
    const int dim = mesh.dimension();
    for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
      const auto conn = mesh.element_nodes(e);
      Eigen::Matrix<long double, 3, 3> j = Eigen::Matrix<long double, 3, 3>::Identity();
      for (int i = 0; i < dim; ++i) {
        for (int k = 0; k < dim; ++k)
          j(k, i) = static_cast<long double>(mesh.node(conn[static_cast<std::size_t>(i + 1)])[k]) -
                    static_cast<long double>(mesh.node(conn[0])[k]);
      }
      total += dim == 3 ? j.determinant() / 6.0L : j.determinant() / 2.0L * static_cast<long double>(mesh.thickness());
    }
    return static_cast<double>(total);
  }
  const Solution s = solve_static(mesh, context.material, context.loads, context.solver);
  if (functional == Functional::compliance) return s.compliance;
  return stress_aggregate(mesh, s.von_mises, context.p, context.sigma_ref);
}

NodeField functional_gradient(const Mesh& mesh, Functional functional, const FdContext& context) {
  if (functional == Functional::volume) return volume_gradient(mesh);
  const ElasticSystem system(mesh, context.material, context.loads, context.solver);
  const Solution s = system.solve();
  if (functional == Functional::compliance) return compliance_gradient(system, s, context.loads);
  return stress_aggregate_gradient(system, s, context.loads, context.p, context.sigma_ref);
}

double fd_check(const Mesh& mesh, Functional functional, const FdContext& context, const NodeField& direction,
                double h) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  if (direction.size() != mesh.node_count()) throw ValidationError("direction does not match the mesh");
  const int dim = mesh.dimension();
  std::vector<Vec3> plus = mesh.nodes(), minus = mesh.nodes();
  for (std::size_t v = 0; v < plus.size(); ++v) {
    if (!direction[v].allFinite()) throw ValidationError("direction is not finite");
    for (int c = 0; c < dim; ++c) {
      plus[v][c] += h * direction[v][c];
      minus[v][c] -= h * direction[v][c];
    }
  }
  const Mesh mp = mesh.with_nodes(plus), mm = mesh.with_nodes(minus);
  for (const Mesh* m : {&mp, &mm}) {
    const MeshReport r = validate(*m);
    if (!r.is_valid) throw ValidationError("perturbed mesh is invalid: " + r.messages.front());
  }
  const NodeField g = functional_gradient(mesh, functional, context);
  double predicted = 0.0;
  for (std::size_t v = 0; v < plus.size(); ++v) predicted += g[v].dot(plus[v] - minus[v]);
  const double difference = functional_value(mp, functional, context) - functional_value(mm, functional, context);
  return std::abs(difference - predicted) / std::max(std::abs(predicted), 1e-30);
}

}  // namespace tracshape
