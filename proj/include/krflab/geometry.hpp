#pragma once

// S^1-invariant Kaehler metrics on CP^1 in the class 2*pi*c_1.
//
// Conventions (shared by every module):
//   s = log|z|^2, x = tanh(s/2) in [-1, 1]; x = -1 is z = 0, x = +1 is z = infinity.
//   v0(s) = 2 log(1 + e^s) is the round potential, v = v0 + f.
//   w = v''/v0'' = 1 + Delta0 f is the density ratio, Delta0 = ((1-x^2) d/dx)' / 2.
//   dmu = v'' ds dtheta = 2*pi * w dx, total volume 4*pi.
//   R = -(log v'')'' / v'' = (1 - Delta0 log w) / w  (R = 1 on the round sphere).
//   Laplacian  Delta F = F_ss / v'' = Delta0 F / w  (Delta u = 1 - R).
//   Gradient   |grad F|^2 = F_s^2 / v'' = (1-x^2) F_x^2 / (2 w).
//   Moment map tau = v'(s) - 1 = x + (1-x^2) f_x / 2.

#include <Eigen/Dense>
#include <numbers>
#include <optional>

#include "krflab/grid.hpp"

namespace krf {

inline constexpr double kVolume = 4.0 * std::numbers::pi;  // total area of every state
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr int kDim = 1;  // complex dimension m

struct Tolerances {
  double vol = 1e-8;
  double gauss_bonnet = 1e-8;
  double pde = 1e-7;
  double norm = 1e-7;
  double w_floor = 1e-10;
};

enum class Parity { Even, Odd, None };

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(GridPtr grid, Eigen::VectorXd values);

  static ScalarField constant(GridPtr grid, double c);
  /// Nodal samples of P_k(x).
  static ScalarField legendre_mode(GridPtr grid, int k, double amplitude = 1.0);

  const GridPtr& grid() const noexcept { return grid_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  double operator[](Eigen::Index i) const { return values_(i); }
  Eigen::Index size() const noexcept { return values_.size(); }

  Eigen::VectorXd modal() const { return grid_->to_modal(values_); }
  double at(double x) const { return grid_->interpolate(values_, x); }
  double min() const { return values_.minCoeff(); }
  double max() const { return values_.maxCoeff(); }
  double sup_abs() const { return values_.cwiseAbs().maxCoeff(); }
  Parity parity(double tol = 1e-9) const;

 private:
  GridPtr grid_;
  Eigen::VectorXd values_;
};

class MetricState {
 public:
  /// Build from Legendre coefficients of f; validates every state invariant.
  static MetricState from_modal(GridPtr grid, Eigen::VectorXd f_modal, const Tolerances& tol = {});
  static MetricState from_nodal(GridPtr grid, const Eigen::VectorXd& f_nodal, const Tolerances& tol = {});

  const GridPtr& grid() const noexcept { return grid_; }
  const Tolerances& tolerances() const noexcept { return tol_; }
  const Eigen::VectorXd& f_modal() const noexcept { return f_modal_; }

  const Eigen::VectorXd& f() const noexcept { return f_; }
  const Eigen::VectorXd& f_x() const noexcept { return f_x_; }
  const Eigen::VectorXd& f_xx() const noexcept { return f_xx_; }
  const Eigen::VectorXd& w() const noexcept { return w_; }
  const Eigen::VectorXd& log_w() const noexcept { return log_w_; }
  const Eigen::VectorXd& curvature() const noexcept { return r_; }
  /// Ricci potential with Delta u = 1 - R and int e^{-u} dmu = 2 pi.
  const Eigen::VectorXd& u() const noexcept { return u_; }
  /// h = -u: Ric - omega = i ddbar h, int e^h dmu = 2 pi.
  Eigen::VectorXd h() const { return -u_; }
  /// h normalized by int e^h dmu = Vol (zero on the round sphere); the gauge the flow uses.
  Eigen::VectorXd h_volume_gauge() const;
  /// Moment coordinate tau at the nodes.
  Eigen::VectorXd moment() const;

  double volume() const noexcept { return volume_; }
  double curvature_integral() const noexcept { return curvature_integral_; }
  double min_density() const { return w_.minCoeff(); }

  /// Modal coefficients of w (used by quadratures at off-grid points).
  Eigen::VectorXd w_modal() const { return grid_->to_modal(w_); }

 private:
  MetricState() = default;
  void build(const Tolerances& tol);

  GridPtr grid_;
  Tolerances tol_;
  Eigen::VectorXd f_modal_;
  Eigen::VectorXd f_, f_x_, f_xx_, w_, log_w_, r_, u_;
  double volume_ = 0.0;
  double curvature_integral_ = 0.0;
};

/// Round Fubini-Study state (f = 0).
MetricState round_state(GridPtr grid, const Tolerances& tol = {});

/// w = 1 + Delta0 f; throws PositivityLoss if min w <= w_floor.
ScalarField density_ratio(const MetricState& state);
ScalarField scalar_curvature(const MetricState& state);
/// Negative-semidefinite Laplacian Delta F = Delta0 F / w.
ScalarField laplacian(const MetricState& state, const ScalarField& field);
/// |grad F|^2 = (1 - x^2) F_x^2 / (2 w).
ScalarField gradient_field(const MetricState& state, const ScalarField& field);
/// 2 pi int F w dx = int F dmu.
double integrate(const MetricState& state, const ScalarField& field);
double integrate(const MetricState& state, const Eigen::VectorXd& nodal);

/// Length of the meridian arc between x1 and x2, int sqrt(v''/2) ds.
/// Throws DegenerateMetric where the density drops below the floor.
double meridian_distance(const MetricState& state, double x1, double x2);
/// Pole-to-pole meridian length (exact diameter for the round sphere, a lower bound otherwise).
double diameter_proxy(const MetricState& state);
/// Meridian distance from x_from to every grid node.
Eigen::VectorXd meridian_distances_from(const MetricState& state, double x_from);

struct DensityCurvature {
  Eigen::VectorXd w;
  Eigen::VectorXd r;
};
/// w and R at the nodes for a modal potential, without the invariant checks of MetricState.
/// Throws PositivityLoss if w <= 0 at a node.
DensityCurvature density_and_curvature(const Grid& grid, const Eigen::VectorXd& f_modal);

void require_same_grid(const GridPtr& a, const GridPtr& b);

}  // namespace krf
