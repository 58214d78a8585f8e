#include "krflab/ode.hpp"

#include <algorithm>
#include <cmath>

#include "krflab/error.hpp"

namespace krf {

void StepController::validate() const {
  if (!(dt_min > 0.0 && dt_min <= dt_init && dt_init <= dt_max)) {
    throw Error(ErrorCode::ConfigError, "step controller needs 0 < dt_min <= dt_init <= dt_max");
  }
  if (!(tol > 0.0)) throw Error(ErrorCode::ConfigError, "step tolerance must be positive");
  if (!(guard > 0.0 && guard < 1.0)) throw Error(ErrorCode::ConfigError, "positivity guard must lie in (0, 1)");
}

namespace ode {
namespace {

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                 b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

}  // namespace

Trial dopri5(const Rhs& f, double t, const Eigen::VectorXd& y, const Eigen::VectorXd& k1, double dt) {
  const Eigen::VectorXd k2 = f(t + 0.2 * dt, y + dt * a21 * k1);
  const Eigen::VectorXd k3 = f(t + 0.3 * dt, y + dt * (a31 * k1 + a32 * k2));
  const Eigen::VectorXd k4 = f(t + 0.8 * dt, y + dt * (a41 * k1 + a42 * k2 + a43 * k3));
  const Eigen::VectorXd k5 = f(t + 8.0 / 9.0 * dt, y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const Eigen::VectorXd k6 = f(t + dt, y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  Trial out;
  out.y = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  out.dy = f(t + dt, out.y);
  out.err = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * out.dy);
  return out;
}

Eigen::VectorXd hermite(double t0, const Eigen::VectorXd& y0, const Eigen::VectorXd& d0, double t1,
                        const Eigen::VectorXd& y1, const Eigen::VectorXd& d1, double t) {
  const double h = t1 - t0;
  if (h == 0.0) return y0;
  const double s = (t - t0) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  return h00 * y0 + (h10 * h) * d0 + h01 * y1 + (h11 * h) * d1;
}

double error_norm(const Eigen::VectorXd& err_in, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1, double tol,
                  Scaling scaling, const Eigen::VectorXd& weights) {
  const Eigen::Index n = err_in.size();
  if (n == 0) return 0.0;
  const Eigen::VectorXd err = weights.size() == n ? Eigen::VectorXd(err_in.cwiseProduct(weights)) : err_in;
  double sum = 0.0;
  if (scaling == Scaling::Relative) {
    const double ref = std::max(y0.cwiseAbs().maxCoeff(), y1.cwiseAbs().maxCoeff());
    if (ref == 0.0) return 0.0;
    const double sc = tol * ref;
    for (Eigen::Index i = 0; i < n; ++i) sum += (err(i) / sc) * (err(i) / sc);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = tol * (1.0 + std::max(std::abs(y0(i)), std::abs(y1(i))));
      sum += (err(i) / sc) * (err(i) / sc);
    }
  }
  return std::sqrt(sum / static_cast<double>(n));
}

Stats integrate(const Rhs& f, double t0, Eigen::VectorXd y, double t_end, const StepController& ctrl,
                const std::vector<double>& stops, const Hooks& hooks, Scaling scaling, const Eigen::VectorXd& weights) {
  ctrl.validate();
  Stats stats;
  double t = t0;
  double dt = ctrl.dt_init;
  Eigen::VectorXd dy = f(t, y);
  std::size_t next_stop = 0;
  while (next_stop < stops.size() && stops[next_stop] <= t0) ++next_stop;
  const double eps_t = 1e-14 * std::max(1.0, std::abs(t_end));

  while (t < t_end - eps_t) {
    double target = t_end;
    if (next_stop < stops.size()) target = std::min(target, stops[next_stop]);
    double h = std::min(dt, target - t);
    bool clipped = h < dt;
    // avoid a sliver step just before a stop by splitting the remainder evenly
    if (!clipped && target - t - h < 0.25 * h) h = 0.5 * (target - t);
    if (h < ctrl.dt_min && !clipped) {
      throw Error(ErrorCode::DtUnderflow, "step size fell below dt_min at t = " + std::to_string(t));
    }

    Trial trial = dopri5(f, t, y, dy, h);
    const double en = trial.y.allFinite() ? error_norm(trial.err, y, trial.y, ctrl.tol, scaling, weights)
                                          : std::numeric_limits<double>::infinity();
    if (!(en <= 1.0)) {
      ++stats.rejected_error;
      const double fac = std::isfinite(en) ? std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9) : 0.25;
      dt = h * fac;
      if (dt < ctrl.dt_min) throw Error(ErrorCode::DtUnderflow, "error control drove dt below dt_min");
      continue;
    }
    if (hooks.admissible && !hooks.admissible(y, trial.y)) {
      ++stats.rejected_guard;
      dt = 0.5 * h;
      if (dt < ctrl.dt_min) throw Error(ErrorCode::DtUnderflow, "positivity guard drove dt below dt_min");
      continue;
    }

    const bool hit_stop = clipped && next_stop < stops.size() && target == stops[next_stop];
    t = clipped ? target : t + h;
    y = std::move(trial.y);
    dy = std::move(trial.dy);
    ++stats.accepted;
    if (hit_stop) ++next_stop;
    if (hooks.accepted) hooks.accepted(t, y, dy);

    const double grow = en > 0.0 ? std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0) : 5.0;
    // a clipped step says nothing about the natural step size
    dt = std::min(ctrl.dt_max, clipped ? std::max(dt, h * grow) : h * grow);
  }
  return stats;
}

}  // namespace ode
}  // namespace krf
