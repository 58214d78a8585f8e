#pragma once

#include <span>
#include <vector>

namespace krf::legendre {

/// P_0..P_n at x.
std::vector<double> values(int n, double x);

/// Clenshaw-type evaluation of sum_k c_k P_k(x).
double eval(std::span<const double> coeffs, double x);

/// Evaluate the series and its first derivative at x.
void eval_with_derivative(std::span<const double> coeffs, double x, double& value, double& deriv);

/// Coefficients of d/dx of a Legendre series (same length, top entry zero).
std::vector<double> derivative(std::span<const double> coeffs);

/// Coefficients of the antiderivative F with F(-1) = 0; length grows by one.
std::vector<double> antiderivative(std::span<const double> coeffs);

/// Apply the round-sphere Laplacian: P_k -> -k(k+1)/2 P_k.
std::vector<double> round_laplacian(std::span<const double> coeffs);

/// int_{-1}^{1} log((1+x)/2) P_k(x) dx.
double log_moment(int k);

}  // namespace krf::legendre
