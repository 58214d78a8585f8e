#pragma once

#include <vector>

namespace krf::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Jacobi rule for int_{-1}^{1} g(x) (1-x)^alpha (1+x)^beta dx.
/// Nodes by Golub-Welsch, then polished with Newton on P_n^{(alpha,beta)}.
Rule gauss_jacobi(int n, double alpha, double beta);

/// Gauss-Legendre rule on [-1, 1].
Rule gauss_legendre(int n);

/// Legendre-Gauss-Lobatto rule with n points (endpoints included), n >= 2.
Rule gauss_lobatto(int n);

/// Gauss-Legendre rule mapped to [a, b].
Rule mapped(const Rule& ref, double a, double b);

}  // namespace krf::quad
