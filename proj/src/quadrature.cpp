#include "krflab/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "krflab/legendre.hpp"

namespace krf::quad {
namespace {

// P_n^{(a,b)}(x) and its derivative by the three-term recurrence.
void jacobi_eval(int n, double a, double b, double x, double& p, double& dp) {
  auto value = [&](int m, double al, double be) {
    if (m == 0) return 1.0;
    double p0 = 1.0;
    double p1 = 0.5 * (al - be + (al + be + 2.0) * x);
    for (int k = 2; k <= m; ++k) {
      const double c = 2.0 * k + al + be;
      const double a1 = 2.0 * k * (k + al + be) * (c - 2.0);
      const double a2 = (c - 1.0) * (al * al - be * be);
      const double a3 = (c - 2.0) * (c - 1.0) * c;
      const double a4 = 2.0 * (k + al - 1.0) * (k + be - 1.0) * c;
      const double p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
      p0 = p1;
      p1 = p2;
    }
    return p1;
  };
  p = value(n, a, b);
  dp = n == 0 ? 0.0 : 0.5 * (n + a + b + 1.0) * value(n - 1, a + 1.0, b + 1.0);
}

}  // namespace

Rule gauss_jacobi(int n, double alpha, double beta) {
  if (n < 1) throw std::invalid_argument("gauss_jacobi: n must be positive");
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  const double ab = alpha + beta;
  for (int k = 0; k < n; ++k) {
    const double c = 2.0 * k + ab;
    diag(k) = (k == 0) ? (beta - alpha) / (ab + 2.0) : (beta * beta - alpha * alpha) / (c * (c + 2.0));
  }
  for (int k = 1; k < n; ++k) {
    const double c = 2.0 * k + ab;
    const double num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
    const double den = c * c * (c + 1.0) * (c - 1.0);
    sub(k - 1) = std::sqrt(num / den);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  std::vector<double> x(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
  std::sort(x.begin(), x.end());

  const double log_const = std::lgamma(n + alpha + 1.0) + std::lgamma(n + beta + 1.0) -
                           std::lgamma(n + ab + 1.0) - std::lgamma(n + 1.0) + (ab + 1.0) * std::log(2.0);
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double xi = x[i];
    double p = 0.0, dp = 1.0;
    for (int it = 0; it < 4; ++it) {
      jacobi_eval(n, alpha, beta, xi, p, dp);
      const double step = p / dp;
      xi -= step;
      if (std::abs(step) < 1e-16) break;
    }
    jacobi_eval(n, alpha, beta, xi, p, dp);
    rule.nodes[i] = xi;
    rule.weights[i] = std::exp(log_const) / ((1.0 - xi * xi) * dp * dp);
  }
  return rule;
}

Rule gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

Rule gauss_lobatto(int n) {
  if (n < 2) throw std::invalid_argument("gauss_lobatto: need at least two points");
  const int degree = n - 1;
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  rule.nodes.front() = -1.0;
  rule.nodes.back() = 1.0;
  if (n > 2) {
    const Rule inner = gauss_jacobi(n - 2, 1.0, 1.0);
    std::copy(inner.nodes.begin(), inner.nodes.end(), rule.nodes.begin() + 1);
  }
  // symmetrize against round-off
  for (int i = 0; i < n / 2; ++i) {
    const double m = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    rule.nodes[i] = -m;
    rule.nodes[n - 1 - i] = m;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto p = legendre::values(degree, rule.nodes[i]);
    rule.weights[i] = 2.0 / (degree * (degree + 1.0) * p[degree] * p[degree]);
  }
  return rule;
}

Rule mapped(const Rule& ref, double a, double b) {
  Rule out = ref;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    out.nodes[i] = mid + half * ref.nodes[i];
    out.weights[i] = half * ref.weights[i];
  }
  return out;
}

}  // namespace krf::quad
