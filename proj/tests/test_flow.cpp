#include <cmath>
#include <numbers>

#include "doctest.h"
#include "krflab/error.hpp"
#include "krflab/flow.hpp"
#include "krflab/profile.hpp"

using namespace krf;

namespace {

Eigen::VectorXd mode(int n, int k, double a) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  c(k) = a;
  return c;
}

MetricState bumpy_state(const GridPtr& g, double a) {
  auto k = [a](double t) { return 1.0 + a * (0.5 * (3 * t * t - 1)) + 0.4 * a * (t * t * t - 0.6 * t); };
  return state_from_curvature_profile(CurvatureProfile::from_function(k, 24, 0.2), g);
}

}  // namespace

TEST_CASE("round metric is a fixed point") {
  const auto g = Grid::make(128);
  const auto st = round_state(g);
  const StepController ctrl;
  for (double dt : {1e-3, 0.1, 1.0}) {
    StepController c = ctrl;
    c.dt_max = std::max(c.dt_max, dt);
    CHECK(step(st, dt, c).f_modal().cwiseAbs().maxCoeff() <= 1e-12);
  }
  const auto traj = run(st, 1.0, ctrl, {0.5, 1.0});
  const auto* end = traj.snapshot_at(1.0);
  REQUIRE(end != nullptr);
  CHECK(end->state.f().cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((end->state.curvature().array() - 1.0).abs().maxCoeff() <= 1e-12);
  for (const auto& s : c_s_series(traj)) CHECK(std::abs(s.c_s) <= 1e-12);
  CHECK(hermitian_log_ratio(traj, 0.5).sup_abs() <= 1e-12);
  CHECK(end->diag.a == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  for (const auto& r : to_unnormalized(traj)) {
    CHECK(r.r_min_hat == doctest::Approx(1.0 / (1.0 - r.s_hat)).epsilon(1e-10));
    CHECK(r.volume_hat == doctest::Approx((1.0 - r.s_hat) * 4 * std::numbers::pi).epsilon(1e-12));
  }
}

TEST_CASE("linearized decay of the P2 mode") {
  const auto g = Grid::make(64);
  const auto st = MetricState::from_modal(g, mode(64, 2, 1e-3));
  StepController ctrl;
  ctrl.tol = 1e-11;
  const auto traj = run(st, 1.0, ctrl, {0.25, 0.5, 0.75, 1.0});
  const double c_end = traj.snapshot_at(1.0)->state.f_modal()(2);
  const double rate = -std::log(c_end / 1e-3);
  CHECK(rate == doctest::Approx(2.0).epsilon(0.02));
  // the P4 mode, seeded only by the nonlinearity, stays second order
  CHECK(std::abs(traj.snapshot_at(1.0)->state.f_modal()(4)) < 1e-5);
}

TEST_CASE("step rejection on positivity and underflow") {
  const auto g = Grid::make(48);
  const auto st = bumpy_state(g, 0.6);
  StepController ctrl;
  ctrl.dt_max = 10.0;
  CHECK_THROWS_AS(step(st, 5.0, ctrl), Error);
  try {
    (void)step(st, 5.0, ctrl);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepRejected);
  }
  try {
    (void)step(st, 1e-12, ctrl);
    FAIL("expected DtUnderflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DtUnderflow);
  }
}

TEST_CASE("perturbed flow: conservation, c_s constancy and its ODE") {
  const auto g = Grid::make(64);
  const auto st = bumpy_state(g, 0.5);
  std::vector<double> snaps;
  for (int k = 1; k <= 40; ++k) snaps.push_back(k / 40.0);
  StepController ctrl;
  ctrl.tol = 1e-10;
  const auto traj = run(st, 1.0, ctrl, snaps);
  for (const auto& s : traj.steps) {
    CHECK(s.vol_error <= 1e-9);
    CHECK(s.gb_error <= 1e-9);
  }
  const auto series = c_s_series(traj);
  CHECK(std::abs(series.front().c_s) <= 1e-12);
  for (const auto& s : series) CHECK(s.residual <= 1e-6 * (std::abs(s.c_s) + 1.0));
  // dc/ds = c - a - log 2 with a from the same snapshots
  for (std::size_t i = 1; i + 1 < traj.snapshots.size(); ++i) {
    const auto& prev = traj.snapshots[i - 1].diag;
    const auto& next = traj.snapshots[i + 1].diag;
    const auto& cur = traj.snapshots[i].diag;
    const double fd = (next.c_s - prev.c_s) / (next.t - prev.t);
    CHECK(fd == doctest::Approx(cur.c_s - cur.a - std::log(2.0)).epsilon(2e-3));
  }
  CHECK(fit_cs_constant(series) > 0.0);
  // the Hermitian ratio at s = 0 is trivial, and c_s - f_s is finite later
  CHECK(hermitian_log_ratio(traj, 0.0).sup_abs() <= 1e-12);
  CHECK(std::isfinite(hermitian_log_ratio(traj, 0.5).sup_abs()));
  // Hermite dense output matches the flow right side at a knot
  const FlowSystem sys(st);
  const double tk = traj.knot_t[traj.knot_t.size() / 2];
  CHECK((traj.derivative_at(tk) - sys.rhs(traj.modal_at(tk))).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("scalar curvature lower bound decays at most like R0 - t/4") {
  const auto g = Grid::make(64);
  auto k = [](double t) { return 1.0 - 0.5 * std::cos(3.0 * t) + 0.2 * t; };
  const auto prof = CurvatureProfile::from_function(k, 32, 0.3);
  const auto st = state_from_curvature_profile(prof, g);
  const double r0 = st.curvature().minCoeff();
  REQUIRE(r0 > 0.0);
  REQUIRE(r0 <= 1.0);
  const auto traj = run(st, 1.0, StepController{}, dyadic_times(6));
  for (const auto& s : traj.steps) {
    if (s.t <= r0) CHECK(s.r_min >= r0 - s.t / 4.0 - 1e-6);
    CHECK(s.r_min >= std::min(r0, 0.0) - 1e-6);
  }
}

TEST_CASE("invalid run arguments") {
  const auto g = Grid::make(16);
  const auto st = round_state(g);
  CHECK_THROWS_AS(run(st, 0.0, StepController{}, {}), Error);
  StepController bad;
  bad.dt_min = 1.0;
  CHECK_THROWS_AS(run(st, 1.0, bad, {}), Error);
}
