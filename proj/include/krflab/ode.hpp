#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace krf {

struct StepController {
  double dt_init = 1e-3;
  double dt_min = 1e-8;
  double dt_max = 5e-2;
  double tol = 1e-9;
  /// A step is refused if min w drops below guard * (min w before the step).
  double guard = 0.5;

  /// Throws ConfigError unless 0 < dt_min <= dt_init <= dt_max, tol > 0, 0 < guard < 1.
  void validate() const;
};

namespace ode {

using Rhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& y)>;

struct Trial {
  Eigen::VectorXd y;    // 5th-order solution at t + dt
  Eigen::VectorXd dy;   // f(t + dt, y), reused as the first stage of the next step
  Eigen::VectorXd err;  // embedded error estimate
};

/// One Dormand-Prince 5(4) step from (t, y) with f(t, y) = dy already known.
Trial dopri5(const Rhs& f, double t, const Eigen::VectorXd& y, const Eigen::VectorXd& dy, double dt);

/// Cubic Hermite interpolation between two knots.
Eigen::VectorXd hermite(double t0, const Eigen::VectorXd& y0, const Eigen::VectorXd& d0, double t1,
                        const Eigen::VectorXd& y1, const Eigen::VectorXd& d1, double t);

enum class Scaling {
  Mixed,     // componentwise tol * (1 + max(|y|, |y_new|))
  Relative,  // tol * max(||y||_inf, ||y_new||_inf); invariant under y -> lambda y
};

struct Hooks {
  /// Extra admissibility test on a trial step (positivity guard); false shrinks dt.
  std::function<bool(const Eigen::VectorXd& y_old, const Eigen::VectorXd& y_new)> admissible;
  /// Called once per accepted step with the new knot.
  std::function<void(double t, const Eigen::VectorXd& y, const Eigen::VectorXd& dy)> accepted;
};

struct Stats {
  int accepted = 0;
  int rejected_error = 0;
  int rejected_guard = 0;
};

/// Adaptive integration from t0 to t_end. Steps are clipped so that every time in
/// `stops` (sorted, inside (t0, t_end]) is hit exactly. Throws DtUnderflow if the
/// controller is driven below dt_min.
Stats integrate(const Rhs& f, double t0, Eigen::VectorXd y, double t_end, const StepController& ctrl,
                const std::vector<double>& stops, const Hooks& hooks, Scaling scaling = Scaling::Mixed,
                const Eigen::VectorXd& weights = Eigen::VectorXd());

/// Weighted RMS norm of an error vector; optional per-component weights multiply the error.
double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1, double tol,
                  Scaling scaling, const Eigen::VectorXd& weights = Eigen::VectorXd());

}  // namespace ode
}  // namespace krf
