#include "krflab/flow.hpp"

#include <algorithm>
#include <cmath>

#include "krflab/entropy.hpp"
#include "krflab/error.hpp"

namespace krf {

ScalarField ricci_potential(const MetricState& state) { return {state.grid(), state.u()}; }

ScalarField ricci_potential_h(const MetricState& state) { return {state.grid(), state.h()}; }

double flow_constant_a(const MetricState& state) {
  const Eigen::VectorXd& u = state.u();
  const Eigen::VectorXd integrand = (-u).array().exp().matrix().cwiseProduct(u);
  return -integrate(state, integrand) / kTwoPi;
}

// ---------------------------------------------------------------- FlowSystem

namespace {

Eigen::VectorXd density_nodal(const Grid& g, const Eigen::VectorXd& psi_modal) {
  return Eigen::VectorXd::Ones(g.modes()) + g.to_nodal(g.laplacian_symbol().cwiseProduct(psi_modal));
}

// log w of a non-positive density is NaN, which the integrator treats as a failed step.
Eigen::VectorXd rhs_unchecked(const Grid& g, double c0, const Eigen::VectorXd& psi_modal) {
  const Eigen::VectorXd w = density_nodal(g, psi_modal);
  Eigen::VectorXd out = g.to_modal(w.array().log().matrix()) + psi_modal;
  out(0) -= c0;
  return out;
}

}  // namespace

FlowSystem::FlowSystem(const MetricState& initial)
    : grid_(initial.grid()), tol_(initial.tolerances()), psi0_(initial.f_modal()) {
  const Eigen::VectorXd field = initial.h_volume_gauge() + initial.log_w() + initial.f();
  c0_ = integrate(initial, field) / kVolume;
}

Eigen::VectorXd FlowSystem::rhs(const Eigen::VectorXd& psi_modal) const {
  if (psi_modal.size() != grid_->modes()) throw Error(ErrorCode::GridMismatch, "coefficient count mismatch");
  if (!(min_density(psi_modal) > 0.0)) throw Error(ErrorCode::PositivityLoss, "density ratio is not positive");
  return rhs_unchecked(*grid_, c0_, psi_modal);
}

double FlowSystem::min_density(const Eigen::VectorXd& psi_modal) const {
  return density_nodal(*grid_, psi_modal).minCoeff();
}

namespace {

// mode k of the step error weighted by (1 + k(k+1)/2)^2, its scale in the curvature
Eigen::VectorXd flow_error_weights(const Grid& g) {
  return (1.0 - g.laplacian_symbol().array()).square().matrix();
}

}  // namespace

MetricState FlowSystem::step(const MetricState& state, double dt, const StepController& ctrl) const {
  ctrl.validate();
  require_same_grid(grid_, state.grid());
  if (!(dt >= ctrl.dt_min)) throw Error(ErrorCode::DtUnderflow, "requested dt below dt_min");
  const Grid& g = *grid_;
  const double c0 = c0_;
  const ode::Rhs f = [&g, c0](double, const Eigen::VectorXd& y) { return rhs_unchecked(g, c0, y); };
  const Eigen::VectorXd& y = state.f_modal();
  const ode::Trial trial = ode::dopri5(f, 0.0, y, f(0.0, y), dt);
  if (!trial.y.allFinite()) throw Error(ErrorCode::StepRejected, "step left the positive cone");
  const double en = ode::error_norm(trial.err, y, trial.y, ctrl.tol, ode::Scaling::Mixed, flow_error_weights(g));
  if (!(en <= 1.0)) throw Error(ErrorCode::StepRejected, "error estimate " + std::to_string(en) + " exceeds tolerance");
  const double wnew = min_density(trial.y);
  if (!(wnew > tol_.w_floor) || wnew < ctrl.guard * state.min_density()) {
    throw Error(ErrorCode::StepRejected, "positivity guard: min w = " + std::to_string(wnew));
  }
  return MetricState::from_modal(grid_, trial.y, tol_);
}

std::pair<double, double> FlowSystem::c_s(const MetricState& state, const Eigen::VectorXd& dpsi_dt) const {
  const Eigen::VectorXd field = grid_->to_nodal(dpsi_dt) + state.h_volume_gauge();
  const double mean = integrate(state, field) / kVolume;
  const Eigen::VectorXd dev = (field.array() - mean).square().matrix();
  return {mean, std::sqrt(std::max(0.0, integrate(state, dev) / kVolume))};
}

MetricState step(const MetricState& state, double dt, const StepController& ctrl) {
  return FlowSystem(state).step(state, dt, ctrl);
}

// ---------------------------------------------------------------- trajectory

std::size_t FlowTrajectory::bracket(double t) const {
  if (knot_t.empty()) throw Error(ErrorCode::RangeError, "empty trajectory");
  if (t < knot_t.front() - 1e-12 || t > knot_t.back() + 1e-12) {
    throw Error(ErrorCode::RangeError, "time " + std::to_string(t) + " outside trajectory");
  }
  auto it = std::upper_bound(knot_t.begin(), knot_t.end(), t);
  std::size_t i = static_cast<std::size_t>(it - knot_t.begin());
  if (i == 0) i = 1;
  if (i >= knot_t.size()) i = knot_t.size() - 1;
  return i - 1;
}

Eigen::VectorXd FlowTrajectory::modal_at(double t) const {
  if (knot_t.size() == 1) return knot_y.front();
  const std::size_t i = bracket(t);
  if (t == knot_t[i]) return knot_y[i];
  if (t == knot_t[i + 1]) return knot_y[i + 1];
  return ode::hermite(knot_t[i], knot_y[i], knot_dy[i], knot_t[i + 1], knot_y[i + 1], knot_dy[i + 1], t);
}

Eigen::VectorXd FlowTrajectory::derivative_at(double t) const {
  if (knot_t.size() == 1) return knot_dy.front();
  const std::size_t i = bracket(t);
  if (t == knot_t[i]) return knot_dy[i];
  if (t == knot_t[i + 1]) return knot_dy[i + 1];
  // derivative of the Hermite cubic
  const double t0 = knot_t[i], t1 = knot_t[i + 1], h = t1 - t0;
  const double s = (t - t0) / h;
  const double d00 = 6 * s * (s - 1) / h, d10 = (1 - s) * (1 - 3 * s), d01 = -d00, d11 = s * (3 * s - 2);
  return d00 * knot_y[i] + d10 * knot_dy[i] + d01 * knot_y[i + 1] + d11 * knot_dy[i + 1];
}

MetricState FlowTrajectory::state_at(double t) const { return MetricState::from_modal(grid, modal_at(t), tol); }

const Snapshot* FlowTrajectory::snapshot_at(double t) const {
  for (const auto& s : snapshots) {
    if (std::abs(s.t - t) <= 1e-12) return &s;
  }
  return nullptr;
}

std::vector<double> FlowTrajectory::snapshot_times() const {
  std::vector<double> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) out.push_back(s.t);
  return out;
}

std::vector<double> dyadic_times(int kmax) {
  std::vector<double> out;
  for (int k = kmax; k >= 0; --k) out.push_back(std::ldexp(1.0, -k));
  return out;
}

namespace {

Snapshot make_snapshot(const FlowSystem& sys, double t, MetricState state, Eigen::VectorXd dpsi) {
  Snapshot snap{t, std::move(state), std::move(dpsi), {}};
  const MetricState& st = snap.state;
  FlowDiagnostics& d = snap.diag;
  d.t = t;
  d.r_min = st.curvature().minCoeff();
  d.r_max = st.curvature().maxCoeff();
  d.sup_grad_u_sq = gradient_field(st, ricci_potential(st)).max();
  d.volume = st.volume();
  d.curvature_integral = st.curvature_integral();
  d.a = flow_constant_a(st);
  std::tie(d.c_s, d.c_s_residual) = sys.c_s(st, snap.dpsi_dt);
  d.w_value = w_functional(st, ricci_potential(st), 1e-6).w;
  return snap;
}

}  // namespace

FlowTrajectory run(const MetricState& initial, double t_end, const StepController& ctrl,
                   std::vector<double> snapshot_times) {
  ctrl.validate();
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw Error(ErrorCode::RangeError, "t_end must be positive");
  std::sort(snapshot_times.begin(), snapshot_times.end());
  snapshot_times.erase(std::unique(snapshot_times.begin(), snapshot_times.end()), snapshot_times.end());
  std::vector<double> stops;
  for (double t : snapshot_times) {
    if (t > 0.0 && t <= t_end) stops.push_back(t);
  }

  const FlowSystem sys(initial);
  FlowTrajectory traj;
  traj.grid = initial.grid();
  traj.tol = initial.tolerances();
  traj.psi0 = initial.f_modal();
  traj.c0 = sys.c0();

  const Grid& g = *traj.grid;
  const double c0 = sys.c0();
  const ode::Rhs f = [&g, c0](double, const Eigen::VectorXd& y) { return rhs_unchecked(g, c0, y); };

  const Eigen::VectorXd dy0 = f(0.0, initial.f_modal());
  traj.knot_t.push_back(0.0);
  traj.knot_y.push_back(initial.f_modal());
  traj.knot_dy.push_back(dy0);
  traj.snapshots.push_back(make_snapshot(sys, 0.0, initial, dy0));
  traj.steps.push_back({0.0, 0.0, std::abs(initial.volume() - kVolume),
                        std::abs(initial.curvature_integral() - kVolume), initial.curvature().minCoeff(),
                        initial.curvature().maxCoeff()});

  std::size_t next_snap = 0;
  const double w_floor = traj.tol.w_floor;
  ode::Hooks hooks;
  hooks.admissible = [&](const Eigen::VectorXd& y_old, const Eigen::VectorXd& y_new) {
    const double wnew = sys.min_density(y_new);
    return wnew > w_floor && wnew >= ctrl.guard * sys.min_density(y_old);
  };
  hooks.accepted = [&](double t, const Eigen::VectorXd& y, const Eigen::VectorXd& dy) {
    MetricState st = MetricState::from_modal(traj.grid, y, traj.tol);
    traj.steps.push_back({t, t - traj.knot_t.back(), std::abs(st.volume() - kVolume),
                          std::abs(st.curvature_integral() - kVolume), st.curvature().minCoeff(),
                          st.curvature().maxCoeff()});
    traj.knot_t.push_back(t);
    traj.knot_y.push_back(y);
    traj.knot_dy.push_back(dy);
    while (next_snap < stops.size() && stops[next_snap] < t - 1e-15) ++next_snap;
    if (next_snap < stops.size() && stops[next_snap] == t) {
      traj.snapshots.push_back(make_snapshot(sys, t, std::move(st), dy));
      ++next_snap;
    }
  };
  traj.stats = ode::integrate(f, 0.0, initial.f_modal(), t_end, ctrl, stops, hooks, ode::Scaling::Mixed,
                               flow_error_weights(*traj.grid));
  return traj;
}

// ---------------------------------------------------------------- derived series

std::vector<CsSample> c_s_series(const FlowTrajectory& traj) {
  std::vector<CsSample> out;
  out.reserve(traj.snapshots.size());
  for (const auto& s : traj.snapshots) out.push_back({s.t, s.diag.c_s, s.diag.c_s_residual});
  return out;
}

double fit_cs_constant(const std::vector<CsSample>& series) {
  double c = 0.0;
  for (const auto& s : series) {
    if (s.s > 0.0) c = std::max(c, std::abs(s.c_s) / std::expm1(s.s));
  }
  return c;
}

ScalarField hermitian_log_ratio(const FlowTrajectory& traj, double s) {
  const Grid& g = *traj.grid;
  if (const Snapshot* snap = traj.snapshot_at(s)) {
    const Eigen::VectorXd fs = g.to_nodal(snap->state.f_modal() - traj.psi0);
    return {traj.grid, Eigen::VectorXd::Constant(g.modes(), snap->diag.c_s) - fs};
  }
  const MetricState st = traj.state_at(s);
  const FlowSystem sys(MetricState::from_modal(traj.grid, traj.psi0, traj.tol));
  const double cs = sys.c_s(st, traj.derivative_at(s)).first;
  const Eigen::VectorXd fs = g.to_nodal(st.f_modal() - traj.psi0);
  return {traj.grid, Eigen::VectorXd::Constant(g.modes(), cs) - fs};
}

RescaledSample rescale(const Snapshot& snap, double s_hat) {
  if (!(s_hat >= 0.0 && s_hat < 1.0)) throw Error(ErrorCode::RangeError, "rescaled time must lie in [0, 1)");
  const double t = -std::log1p(-s_hat);
  if (std::abs(t - snap.t) > 1e-9 * std::max(1.0, t)) {
    throw Error(ErrorCode::RangeError, "snapshot time does not match t(s) = -log(1 - s)");
  }
  const double k = 1.0 - s_hat;
  return {s_hat, snap.t, snap.diag.r_min / k, snap.diag.r_max / k, k * snap.diag.volume};
}

std::vector<RescaledSample> to_unnormalized(const FlowTrajectory& traj) {
  std::vector<RescaledSample> out;
  for (const auto& snap : traj.snapshots) out.push_back(rescale(snap, -std::expm1(-snap.t)));
  return out;
}

}  // namespace krf
