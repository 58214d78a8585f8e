#include "krflab/grid.hpp"

#include <stdexcept>

#include "krflab/legendre.hpp"
#include "krflab/quadrature.hpp"

namespace krf {

Grid::Grid(int modes) : modes_(modes) {
  if (modes < 4) throw std::invalid_argument("Grid: need at least 4 modes");
  const quad::Rule rule = quad::gauss_lobatto(modes);
  nodes_ = rule.nodes;
  weights_ = rule.weights;
  const int n = modes;
  const int degree = n - 1;
  vandermonde_.resize(n, n);
  for (int i = 0; i < n; ++i) {
    const auto p = legendre::values(degree, nodes_[i]);
    for (int k = 0; k < n; ++k) vandermonde_(i, k) = p[k];
  }
  // c_k = (1/gamma_k) sum_i w_i P_k(x_i) f_i, gamma_k = 2/(2k+1), gamma_N = 2/N
  transform_.resize(n, n);
  for (int k = 0; k < n; ++k) {
    const double gamma = (k == degree) ? 2.0 / degree : 2.0 / (2.0 * k + 1.0);
    for (int i = 0; i < n; ++i) transform_(k, i) = weights_[i] * vandermonde_(i, k) / gamma;
  }
  symbol_.resize(n);
  for (int k = 0; k < n; ++k) symbol_(k) = -0.5 * k * (k + 1.0);
  weight_vec_ = to_eigen(weights_);
}

std::shared_ptr<const Grid> Grid::make(int modes) { return std::make_shared<const Grid>(modes); }

Eigen::VectorXd Grid::to_nodal(const Eigen::VectorXd& modal) const {
  if (modal.size() != modes_) throw std::invalid_argument("Grid::to_nodal: size mismatch");
  return vandermonde_ * modal;
}

Eigen::VectorXd Grid::to_modal(const Eigen::VectorXd& nodal) const {
  if (nodal.size() != modes_) throw std::invalid_argument("Grid::to_modal: size mismatch");
  return transform_ * nodal;
}

Eigen::VectorXd Grid::dx(const Eigen::VectorXd& nodal) const {
  const Eigen::VectorXd c = to_modal(nodal);
  const auto d = legendre::derivative(std::span<const double>(c.data(), c.size()));
  return to_nodal(to_eigen(d));
}

Eigen::VectorXd Grid::round_laplacian(const Eigen::VectorXd& nodal) const {
  return to_nodal(symbol_.cwiseProduct(to_modal(nodal)));
}

double Grid::quadrature(const Eigen::VectorXd& nodal) const { return weight_vec_.dot(nodal); }

double Grid::interpolate(const Eigen::VectorXd& nodal, double x) const {
  const Eigen::VectorXd c = to_modal(nodal);
  return legendre::eval(std::span<const double>(c.data(), c.size()), x);
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(std::span<const double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace krf
