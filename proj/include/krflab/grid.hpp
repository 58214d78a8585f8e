#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

namespace krf {

/// Legendre-Gauss-Lobatto collocation grid in x = tanh(s/2) on [-1, 1].
///
/// `modes` is the number of Legendre coefficients (polynomial degree modes-1)
/// and equals the number of collocation nodes; x = -1 and x = +1 are the poles.
class Grid {
 public:
  explicit Grid(int modes);

  static std::shared_ptr<const Grid> make(int modes);

  int modes() const noexcept { return modes_; }
  int degree() const noexcept { return modes_ - 1; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// Nodal values at the collocation points from Legendre coefficients.
  Eigen::VectorXd to_nodal(const Eigen::VectorXd& modal) const;
  /// Discrete Legendre transform (interpolation at the nodes).
  Eigen::VectorXd to_modal(const Eigen::VectorXd& nodal) const;

  /// Spectral derivative d/dx of nodal data.
  Eigen::VectorXd dx(const Eigen::VectorXd& nodal) const;
  /// Round-sphere Laplacian ((1-x^2) F_x)_x / 2 of nodal data.
  Eigen::VectorXd round_laplacian(const Eigen::VectorXd& nodal) const;
  /// Eigenvalue -k(k+1)/2 of the round Laplacian on P_k.
  const Eigen::VectorXd& laplacian_symbol() const noexcept { return symbol_; }

  /// Quadrature sum_i w_i g_i (exact for polynomial degree <= 2*modes-3).
  double quadrature(const Eigen::VectorXd& nodal) const;

  /// Evaluate the interpolant of nodal data at arbitrary x.
  double interpolate(const Eigen::VectorXd& nodal, double x) const;

  const Eigen::MatrixXd& vandermonde() const noexcept { return vandermonde_; }
  const Eigen::MatrixXd& transform() const noexcept { return transform_; }

 private:
  int modes_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  Eigen::MatrixXd vandermonde_;  // V(i, k) = P_k(x_i)
  Eigen::MatrixXd transform_;    // inverse of V via discrete orthogonality
  Eigen::VectorXd symbol_;
  Eigen::VectorXd weight_vec_;
};

using GridPtr = std::shared_ptr<const Grid>;

std::vector<double> to_std(const Eigen::VectorXd& v);
Eigen::VectorXd to_eigen(std::span<const double> v);

}  // namespace krf
