#pragma once

// Green function of the real Laplace-Beltrami operator with pole at the south pole x = -1:
//   -Delta_real Gamma = delta - 1/V,  int Gamma dmu = 0.
// The radial flux law gives Gamma_s = -(1 - A(s)/V) / (4 pi), A(s) the area below s; in x,
//   Gamma = -(1/(4 pi)) log((1+x)/2) + Gamma_reg(x)
// with Gamma_reg smooth, integrated spectrally from the flux law.

#include <utility>

#include "krflab/geometry.hpp"

namespace krf {

class GreenProfile {
 public:
  const GridPtr& grid() const noexcept { return grid_; }
  /// Gamma(x) for x in (-1, 1].
  double operator()(double x) const;
  /// Smooth part Gamma + log((1+x)/2) / (4 pi) at the nodes.
  const Eigen::VectorXd& regular() const noexcept { return regular_; }
  const Eigen::VectorXd& regular_modal() const noexcept { return regular_modal_; }
  /// Gamma at nodes 1..n-1 (the pole node 0 is excluded).
  Eigen::VectorXd off_pole_values() const;

  /// max over nodes of |Delta_real Gamma - 1/V| (the pole contribution is handled analytically).
  double equation_residual() const { return equation_residual_; }
  /// max over nodes of |4 pi Gamma_s + (1 - A(s)/V)|.
  double flux_residual() const { return flux_residual_; }
  /// int Gamma dmu after normalization.
  double mean() const { return mean_; }

 private:
  friend GreenProfile green_profile(const MetricState& state);
  GridPtr grid_;
  Eigen::VectorXd regular_;
  Eigen::VectorXd regular_modal_;
  double equation_residual_ = 0.0;
  double flux_residual_ = 0.0;
  double mean_ = 0.0;
};

GreenProfile green_profile(const MetricState& state);

struct LogBoundFit {
  double c_lower = 0.0;  // -min Gamma
  double c_log = 0.0;    // least C with Gamma <= C |log d| + C at the nodes and graded samples
  double near_pole_slope = 0.0;  // d Gamma / d log(1/d) as d -> 0
};
LogBoundFit log_bound_fit(const GreenProfile& gp, const MetricState& state);

/// F(pole) - (1/V) int F dmu - int Gamma (-Delta_real F) dmu; vanishes by Green's representation.
double mean_value_bound(const MetricState& state, const ScalarField& f);
double mean_value_bound(const GreenProfile& gp, const MetricState& state, const ScalarField& f);

/// int |Gamma|^p dmu by graded quadrature toward the pole.
double green_lp_integral(const GreenProfile& gp, const MetricState& state, double p);

struct GreenChain {
  double lhs = 0.0;  // (1/V) int u dmu
  double rhs = 0.0;  // u(pole) + 2 (1 + C0) B V with B = C_lower, C0 = max(0, -min R)
  double identity_residual = 0.0;
  bool holds = false;
};
/// The Green-formula bound on the mean of the Ricci potential, taken at the pole.
GreenChain green_mean_chain(const MetricState& state);

}  // namespace krf
