#include "krflab/parabolic.hpp"

#include <algorithm>
#include <cmath>

#include "krflab/error.hpp"
#include "krflab/quadrature.hpp"

namespace krf {
namespace {

// int |F|^p dmu on the metric with density w
double lp_mass(const Grid& g, const Eigen::VectorXd& f, const Eigen::VectorXd& w, double p) {
  return kTwoPi * g.quadrature(f.cwiseAbs().array().pow(p).matrix().cwiseProduct(w));
}

}  // namespace

HeatRun evolve_heat(const FlowTrajectory& traj, const ScalarField& f0, double a, double p,
                    const StepController& ctrl, std::vector<double> store_times, double t_end) {
  require_same_grid(traj.grid, f0.grid());
  if (!(a >= 0.0)) throw Error(ErrorCode::RangeError, "zeroth-order coefficient must be nonnegative");
  if (!(p > 0.0)) throw Error(ErrorCode::RangeError, "exponent p must be positive");
  if (!(t_end > 0.0) || t_end > traj.t_end() + 1e-12) {
    throw Error(ErrorCode::RangeError, "trajectory does not cover [0, t_end]");
  }
  if (f0.min() < 0.0) throw Error(ErrorCode::NegativityDetected, "initial data must be nonnegative");
  ctrl.validate();

  if (store_times.empty()) store_times = dyadic_times();
  store_times.push_back(t_end);
  std::erase_if(store_times, [&](double t) { return !(t > 0.0 && t <= t_end); });
  std::sort(store_times.begin(), store_times.end());
  store_times.erase(std::unique(store_times.begin(), store_times.end()), store_times.end());

  const Grid& g = *traj.grid;
  const auto density = [&](double t) { return density_and_curvature(g, traj.modal_at(std::min(t, t_end))).w; };
  const ode::Rhs rhs = [&](double t, const Eigen::VectorXd& y) {
    return Eigen::VectorXd(g.round_laplacian(y).cwiseQuotient(density(t)) + a * y);
  };

  HeatRun out;
  out.grid = traj.grid;
  out.a = a;
  out.p = p;
  out.times.push_back(0.0);
  out.fields.push_back(f0.values());
  out.accumulated.push_back(0.0);
  {
    const Eigen::VectorXd w0 = density(0.0);
    out.mass.push_back(lp_mass(g, f0.values(), w0, 1.0));
  }

  // the space-time integral runs over the Hermite interpolant of each accepted step
  const quad::Rule ref = quad::gauss_legendre(4);
  double t_prev = 0.0;
  Eigen::VectorXd y_prev = f0.values();
  Eigen::VectorXd dy_prev = rhs(0.0, y_prev);
  double acc = 0.0;
  std::size_t next = 0;
  ode::Hooks hooks;
  hooks.accepted = [&](double t, const Eigen::VectorXd& y, const Eigen::VectorXd& dy) {
    const double scale = y.cwiseAbs().maxCoeff();
    if (y.minCoeff() < -1e-9 * std::max(scale, 1e-300)) {
      throw Error(ErrorCode::NegativityDetected, "heat solution turned negative at t = " + std::to_string(t));
    }
    const quad::Rule r = quad::mapped(ref, t_prev, t);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
      const Eigen::VectorXd fi = ode::hermite(t_prev, y_prev, dy_prev, t, y, dy, r.nodes[i]);
      acc += r.weights[i] * lp_mass(g, fi, density(r.nodes[i]), p);
    }
    t_prev = t;
    y_prev = y;
    dy_prev = dy;
    if (next < store_times.size() && t == store_times[next]) {
      out.times.push_back(t);
      out.fields.push_back(y);
      out.accumulated.push_back(acc);
      out.mass.push_back(lp_mass(g, y, density(t), 1.0));
      ++next;
    }
  };
  out.stats = ode::integrate(rhs, 0.0, f0.values(), t_end, ctrl, store_times, hooks, ode::Scaling::Relative);
  if (next != store_times.size()) throw Error(ErrorCode::SolveFailure, "heat solve missed stored times");
  return out;
}

double moser_ratio(const HeatRun& run, int n0) {
  if (n0 <= 2) throw Error(ErrorCode::RangeError, "n0 must exceed 2");
  const double denom = std::pow(run.spacetime_lp(), 1.0 / run.p);
  if (!(denom > 0.0)) throw Error(ErrorCode::ZeroDenominator, "space-time integral of F^p vanishes");
  const double e = (n0 + 2.0) / (2.0 * run.p);
  double best = 0.0;
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    if (run.times[i] <= 0.0) continue;
    best = std::max(best, run.fields[i].maxCoeff() * std::pow(run.times[i], e));
  }
  return best / denom;
}

}  // namespace krf
