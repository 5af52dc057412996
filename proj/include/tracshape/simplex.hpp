#pragma once

// Constant-gradient kernels shared by the solver and the sensitivity code.

#include <Eigen/Dense>

#include "tracshape/mesh.hpp"

namespace tracshape::simplex {

template <int Dim>
using Coords = Eigen::Matrix<double, Dim, Dim + 1>;

/// Columns are the gradients of the barycentric shape functions.
template <int Dim>
using Gradients = Eigen::Matrix<double, Dim, Dim + 1>;

template <int Dim>
using Tensor = Eigen::Matrix<double, Dim, Dim>;

template <int Dim>
Coords<Dim> gather_coords(const Mesh& mesh, Index e) {
  Coords<Dim> x;
  const auto& conn = mesh.element(e);
  for (int a = 0; a <= Dim; ++a) x.col(a) = mesh.node(conn[a]).template head<Dim>();
  return x;
}

template <int Dim>
Eigen::Matrix<double, Dim, Dim> edge_matrix(const Coords<Dim>& x) {
  Eigen::Matrix<double, Dim, Dim> j;
  for (int i = 0; i < Dim; ++i) j.col(i) = x.col(i + 1) - x.col(0);
  return j;
}

/// det(J) / Dim!
template <int Dim>
double signed_measure(const Coords<Dim>& x) {
  const double det = edge_matrix<Dim>(x).determinant();
  return Dim == 2 ? det / 2.0 : det / 6.0;
}

/// G = J^-T S, S = [-1 | I].
template <int Dim>
Gradients<Dim> gradients(const Coords<Dim>& x) {
  const Eigen::Matrix<double, Dim, Dim> jinv_t = edge_matrix<Dim>(x).inverse().transpose();
  Gradients<Dim> g;
  g.template rightCols<Dim>() = jinv_t;
  g.col(0) = -jinv_t.rowwise().sum();
  return g;
}

/// Displacement gradient H_ij = sum_a u_{a,i} G_{j,a}, summed as differences from node 0 so that a
/// translation of the element cancels exactly.
template <int Dim>
Tensor<Dim> displacement_gradient(const Gradients<Dim>& g, const Eigen::Matrix<double, Dim, Dim + 1>& u) {
  const Eigen::Matrix<double, Dim, Dim> du = u.template rightCols<Dim>().colwise() - u.col(0);
  return du * g.template rightCols<Dim>().transpose();
}

/// Isotropic law sigma = a tr(eps) I + 2 b eps. For plane stress a = E nu / (1 - nu^2).
struct Lame {
  double a = 0.0;
  double b = 0.0;
};

template <int Dim>
Tensor<Dim> apply_law(const Lame& lame, const Tensor<Dim>& eps) {
  return lame.a * eps.trace() * Tensor<Dim>::Identity() + 2.0 * lame.b * eps;
}

}  // namespace tracshape::simplex
