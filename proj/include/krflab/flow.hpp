#pragma once

// Normalized Kaehler-Ricci flow in potential form.
//
// With psi the potential relative to the round metric and omega the initial metric,
// f_s = psi(s) - psi(0) solves  df/ds = log(omega_s / omega) + f - h_omega,
// equivalently  dpsi/ds = log w + psi - c0  with the constant c0 = log w0 + psi0 + h_omega
// frozen at s = 0. h_omega is taken in the volume gauge (int e^h dmu = Vol), so the
// round metric is an exact fixed point.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "krflab/geometry.hpp"
#include "krflab/ode.hpp"

namespace krf {

/// u with Delta u = 1 - R and int e^{-u} dmu = 2 pi.
ScalarField ricci_potential(const MetricState& state);
/// h = -u normalized by int e^h dmu = 2 pi.
ScalarField ricci_potential_h(const MetricState& state);
/// a = -(1/2 pi) int e^{-u} u dmu.
double flow_constant_a(const MetricState& state);

struct FlowDiagnostics {
  double t = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
  double sup_grad_u_sq = 0.0;
  double volume = 0.0;
  double curvature_integral = 0.0;
  double a = 0.0;
  double c_s = 0.0;
  double c_s_residual = 0.0;
  double w_value = 0.0;  // W(g, u) at tau = 1/2
};

struct Snapshot {
  double t = 0.0;
  MetricState state;
  Eigen::VectorXd dpsi_dt;  // modal time derivative from the flow right side
  FlowDiagnostics diag;
};

struct StepRecord {
  double t = 0.0;
  double dt = 0.0;
  double vol_error = 0.0;
  double gb_error = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
};

/// The right side of the flow for a fixed initial metric.
class FlowSystem {
 public:
  explicit FlowSystem(const MetricState& initial);

  const GridPtr& grid() const noexcept { return grid_; }
  double c0() const noexcept { return c0_; }
  const Eigen::VectorXd& initial_modal() const noexcept { return psi0_; }
  const Tolerances& tolerances() const noexcept { return tol_; }

  /// Modal right side log w + psi - c0; throws PositivityLoss if w <= 0 at a node.
  Eigen::VectorXd rhs(const Eigen::VectorXd& psi_modal) const;
  /// Minimum of w at the nodes for a modal potential.
  double min_density(const Eigen::VectorXd& psi_modal) const;

  /// One Dormand-Prince step of size dt from `state`. Throws StepRejected if the error
  /// estimate exceeds ctrl.tol or the positivity guard trips, DtUnderflow if dt < dt_min.
  MetricState step(const MetricState& state, double dt, const StepController& ctrl) const;

  /// c_s and its spatial standard deviation for a state and its modal time derivative.
  std::pair<double, double> c_s(const MetricState& state, const Eigen::VectorXd& dpsi_dt) const;

 private:
  GridPtr grid_;
  Tolerances tol_;
  Eigen::VectorXd psi0_;
  double c0_ = 0.0;
};

struct FlowTrajectory {
  GridPtr grid;
  Tolerances tol;
  Eigen::VectorXd psi0;
  double c0 = 0.0;
  std::vector<double> knot_t;  // accepted step times, starting at 0
  std::vector<Eigen::VectorXd> knot_y;
  std::vector<Eigen::VectorXd> knot_dy;
  std::vector<Snapshot> snapshots;  // sorted by time
  std::vector<StepRecord> steps;
  ode::Stats stats;

  double t_end() const { return knot_t.empty() ? 0.0 : knot_t.back(); }
  /// Hermite-interpolated modal potential and its derivative.
  Eigen::VectorXd modal_at(double t) const;
  Eigen::VectorXd derivative_at(double t) const;
  MetricState state_at(double t) const;
  /// Snapshot stored at exactly time t (within 1e-12), if any.
  const Snapshot* snapshot_at(double t) const;
  std::vector<double> snapshot_times() const;

 private:
  std::size_t bracket(double t) const;
};

/// Dyadic times 2^{-k}, k = 0..kmax, in increasing order.
std::vector<double> dyadic_times(int kmax = 10);

/// Integrate from `initial` to t_end. Snapshots are stored at t = 0 and at each requested
/// time, hit exactly by the step controller. Every accepted step is validated as a MetricState.
FlowTrajectory run(const MetricState& initial, double t_end, const StepController& ctrl,
                   std::vector<double> snapshot_times);

/// Convenience: a single step from `state` treating it as the initial metric.
MetricState step(const MetricState& state, double dt, const StepController& ctrl);

struct CsSample {
  double s;
  double c_s;
  double residual;
};
std::vector<CsSample> c_s_series(const FlowTrajectory& traj);

/// Least C with |c_s| <= C (e^s - 1) over the stored samples with s > 0.
double fit_cs_constant(const std::vector<CsSample>& series);

/// c_s - f_s at snapshot time s (f_s = psi(s) - psi(0)); exp of it is H_{omega_s} / H_omega.
ScalarField hermitian_log_ratio(const FlowTrajectory& traj, double s);

struct RescaledSample {
  double s_hat;       // s_hat = 1 - e^{-t}
  double t;
  double r_min_hat;   // R(t) / (1 - s_hat)
  double r_max_hat;
  double volume_hat;  // (1 - s_hat) * Vol
};
/// Map the normalized flow to the unnormalized one, g_hat(s) = (1 - s) g(t(s)).
std::vector<RescaledSample> to_unnormalized(const FlowTrajectory& traj);
RescaledSample rescale(const Snapshot& snap, double s_hat);

}  // namespace krf
