#include "krflab/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "krflab/error.hpp"

namespace krf {
namespace {

double constraint_mass(const MetricState& st, const Eigen::VectorXd& f) {
  return integrate(st, (-f).array().exp().matrix());
}

// x log x with the continuous extension at 0
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Derivative at xs[i] of the Lagrange interpolant through (up to) five neighbouring samples.
double stencil_derivative(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t i) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const std::size_t width = std::min<std::size_t>(5, n);
  std::size_t lo = i >= width / 2 ? i - width / 2 : 0;
  if (lo + width > n) lo = n - width;
  double d = 0.0;
  for (std::size_t j = lo; j < lo + width; ++j) {
    // l_j'(x_i)
    double lj = 0.0;
    if (j == i) {
      for (std::size_t k = lo; k < lo + width; ++k) {
        if (k != j) lj += 1.0 / (xs[i] - xs[k]);
      }
    } else {
      lj = 1.0 / (xs[j] - xs[i]);
      for (std::size_t k = lo; k < lo + width; ++k) {
        if (k != j && k != i) lj *= (xs[i] - xs[k]) / (xs[j] - xs[k]);
      }
    }
    d += lj * ys[j];
  }
  return d;
}

}  // namespace

WValue w_functional(const MetricState& st, const ScalarField& f, double constraint_tol) {
  require_same_grid(st.grid(), f.grid());
  const Eigen::VectorXd& fv = f.values();
  WValue out;
  out.constraint = std::abs(constraint_mass(st, fv) - kTwoPi);
  if (!(out.constraint <= constraint_tol)) {
    throw Error(ErrorCode::ConstraintViolated,
                "int e^{-f} dmu misses 2 pi by " + std::to_string(out.constraint));
  }
  const Eigen::ArrayXd ef = (-fv).array().exp();
  const Eigen::ArrayXd grad = gradient_field(st, f).values().array();
  const Eigen::ArrayXd r = st.curvature().array();
  out.w = integrate(st, (ef * (r + grad + fv.array() - 2.0)).matrix()) / kTwoPi;

  const Eigen::VectorXd big_f = (ef / kTwoPi).sqrt().matrix();
  const Eigen::ArrayXd grad_f = gradient_field(st, ScalarField(st.grid(), big_f)).values().array();
  const Eigen::ArrayXd f2 = big_f.array().square();
  Eigen::ArrayXd integrand = r * f2 + 4.0 * grad_f;
  for (Eigen::Index i = 0; i < integrand.size(); ++i) integrand(i) -= xlogx(f2(i));
  out.w_f_form = integrate(st, integrand.matrix()) - 2.0 - std::log(kTwoPi);
  return out;
}

// ---------------------------------------------------------------- mu

namespace {

struct LogSobolev {
  const MetricState& st;
  const Grid& g;
  Eigen::VectorXd stiff;  // Dirichlet form diagonal: int |grad F|^2 dmu = sum stiff_k c_k^2
  Eigen::VectorXd mass_w;  // 2 pi q_i w_i

  explicit LogSobolev(const MetricState& s) : st(s), g(*s.grid()) {
    const int n = g.modes();
    stiff.resize(n);
    for (int k = 0; k < n; ++k) stiff(k) = kTwoPi * k * (k + 1.0) / (2.0 * k + 1.0);
    mass_w.resize(n);
    for (int i = 0; i < n; ++i) mass_w(i) = kTwoPi * g.weights()[i] * st.w()(i);
  }

  double norm2(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd f = g.to_nodal(c);
    return mass_w.dot(f.cwiseProduct(f));
  }

  double value(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd f = g.to_nodal(c);
    double pointwise = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double f2 = f(i) * f(i);
      pointwise += mass_w(i) * (st.curvature()(i) * f2 - xlogx(f2));
    }
    return pointwise + 4.0 * c.dot(stiff.cwiseProduct(c)) - 2.0 - std::log(kTwoPi);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd f = g.to_nodal(c);
    Eigen::VectorXd local(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double f2 = f(i) * f(i);
      const double lg = f2 > 0.0 ? std::log(f2) : 0.0;
      local(i) = mass_w(i) * (2.0 * st.curvature()(i) * f(i) - 2.0 * f(i) * lg - 2.0 * f(i));
    }
    return g.vandermonde().transpose() * local + 8.0 * stiff.cwiseProduct(c);
  }

  Eigen::VectorXd norm_gradient(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd f = g.to_nodal(c);
    return g.vandermonde().transpose() * (2.0 * mass_w.cwiseProduct(f));
  }
};

}  // namespace

MuEstimate mu_estimate(const MetricState& st, const MuOptions& opts) {
  const LogSobolev ls(st);
  const Grid& g = *st.grid();
  const int n = g.modes();
  Eigen::VectorXd c = g.to_modal(((-st.u()).array() * 0.5).exp().matrix() / std::sqrt(kTwoPi));
  c /= std::sqrt(ls.norm2(c));

  // diagonal preconditioner: mass + 4 x stiffness on the round sphere
  Eigen::VectorXd precond(n);
  for (int k = 0; k < n; ++k) precond(k) = 2.0 * kTwoPi * 2.0 / (2.0 * k + 1.0) + 8.0 * ls.stiff(k);

  MuEstimate out;
  double wv = ls.value(c);
  out.history.push_back(wv);
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd grad = ls.gradient(c);
    const Eigen::VectorXd ng = ls.norm_gradient(c);
    const Eigen::VectorXd pg = grad.cwiseQuotient(precond);
    const Eigen::VectorXd png = ng.cwiseQuotient(precond);
    // tangent direction in the preconditioned metric
    Eigen::VectorXd dir = -(pg - (ng.dot(pg) / ng.dot(png)) * png);
    const double slope = grad.dot(dir);
    const double gnorm = std::sqrt(std::max(0.0, -slope));
    if (gnorm < opts.gradient_tol) break;
    double alpha = 1.0;
    bool accepted = false;
    for (int ls_it = 0; ls_it < 50; ++ls_it) {
      Eigen::VectorXd trial = c + alpha * dir;
      trial /= std::sqrt(ls.norm2(trial));
      const double wt = ls.value(trial);
      if (std::isfinite(wt) && wt <= wv + opts.armijo * alpha * slope) {
        c = std::move(trial);
        wv = wt;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // round-off floor near a critical point; anything else is a genuine stall
      if (gnorm > 1e-6) throw Error(ErrorCode::DescentStalled, "line search failed with gradient " + std::to_string(gnorm));
      break;
    }
    out.history.push_back(wv);
    out.iterations = it + 1;
  }
  out.value = wv;
  out.minimizer = ScalarField(st.grid(), g.to_nodal(c));
  return out;
}

// ---------------------------------------------------------------- coupled system

double w_derivative_integrand(const MetricState& st, const ScalarField& f) {
  require_same_grid(st.grid(), f.grid());
  const Grid& g = *st.grid();
  const auto& x = g.nodes();
  const Eigen::VectorXd& fv = f.values();
  const Eigen::VectorXd fx = g.dx(fv);
  const Eigen::VectorXd fxx = g.dx(fx);
  const Eigen::VectorXd lwx = g.dx(st.log_w());
  const Eigen::VectorXd lap = g.round_laplacian(fv).cwiseQuotient(st.w());
  Eigen::VectorXd integrand(g.modes());
  for (int i = 0; i < g.modes(); ++i) {
    // Ric + i ddbar f - omega = (R + Delta f - 1) omega in complex dimension one
    const double trace = st.curvature()(i) + lap(i) - 1.0;
    // |f_{;zz}|^2 / g^2 = ((1 - x^2)/(2w))^2 (f_xx - (log w)_x f_x)^2
    const double jw = 0.5 * (1.0 - x[i] * x[i]) / st.w()(i);
    const double hess = jw * (fxx(i) - lwx(i) * fx(i));
    integrand(i) = std::exp(-fv(i)) * (trace * trace + hess * hess);
  }
  return integrate(st, integrand) / kTwoPi;
}

std::vector<EntropyRecord> coupled_w_series(const FlowTrajectory& traj, const ScalarField& f_terminal,
                                            const CoupledOptions& opts) {
  require_same_grid(traj.grid, f_terminal.grid());
  if (opts.samples < 2) throw Error(ErrorCode::RangeError, "need at least two recording times");
  const double T = traj.t_end();
  if (!(T > 0.0)) throw Error(ErrorCode::RangeError, "trajectory has no extent");
  const Grid& g = *traj.grid;
  {
    const MetricState end = traj.state_at(T);
    const double miss = std::abs(constraint_mass(end, f_terminal.values()) - kTwoPi);
    if (miss > 1e-6) throw Error(ErrorCode::ConstraintViolated, "terminal data is not admissible");
  }

  std::vector<double> times(opts.samples);
  // graded toward t = 0, where the conjugate solution carries the fastest transient
  for (int j = 0; j < opts.samples; ++j) {
    const double q = j / (opts.samples - 1.0);
    times[j] = T * q * q;
  }
  times.back() = T;
  // backward time sigma = T - t
  std::vector<double> stops;
  for (int j = opts.samples - 2; j >= 0; --j) stops.push_back(T - times[j]);

  const ode::Rhs rhs = [&](double sigma, const Eigen::VectorXd& y) {
    const double t = std::clamp(T - sigma, 0.0, T);
    const DensityCurvature dc = density_and_curvature(g, traj.modal_at(t));
    return Eigen::VectorXd(g.round_laplacian(y).cwiseQuotient(dc.w) - (dc.r.array() - 1.0).matrix().cwiseProduct(y));
  };

  std::vector<Eigen::VectorXd> sol(opts.samples);
  sol.back() = (-f_terminal.values()).array().exp().matrix();
  std::size_t next = 0;
  ode::Hooks hooks;
  hooks.accepted = [&](double sigma, const Eigen::VectorXd& y, const Eigen::VectorXd&) {
    if (next < stops.size() && sigma == stops[next]) {
      sol[opts.samples - 2 - next] = y;
      ++next;
    }
  };
  hooks.admissible = [](const Eigen::VectorXd&, const Eigen::VectorXd& y) { return y.minCoeff() > 0.0; };
  ode::integrate(rhs, 0.0, sol.back(), T, opts.ctrl, stops, hooks, ode::Scaling::Mixed);
  if (next != stops.size()) throw Error(ErrorCode::SolveFailure, "coupled solve missed recording times");

  std::vector<EntropyRecord> out(opts.samples);
  std::vector<double> wv(opts.samples);
  for (int j = 0; j < opts.samples; ++j) {
    const MetricState st = traj.state_at(times[j]);
    const ScalarField f(traj.grid, (-sol[j].array().log()).matrix());
    const WValue val = w_functional(st, f, 1e-6);
    out[j].t = times[j];
    out[j].w = val.w;
    out[j].constraint = val.constraint;
    out[j].dwdt_integrand = w_derivative_integrand(st, f);
    wv[j] = val.w;
  }
  for (int j = 0; j < opts.samples; ++j) out[j].dwdt_fd = stencil_derivative(times, wv, j);
  return out;
}

// ---------------------------------------------------------------- Sobolev probe

double sobolev_ratio(const MetricState& st, const ScalarField& f, int n0, double c0) {
  if (n0 <= 2) throw Error(ErrorCode::RangeError, "n0 must exceed 2");
  const double q = 2.0 * n0 / (n0 - 2.0);
  const Eigen::VectorXd pw = f.values().cwiseAbs().array().pow(q).matrix();
  const double lhs = std::pow(integrate(st, pw), (n0 - 2.0) / n0);
  const Eigen::VectorXd rhs_field = 4.0 * gradient_field(st, f).values() +
                                    (st.curvature().array() + c0).matrix().cwiseProduct(f.values().cwiseAbs2());
  const double rhs = integrate(st, rhs_field);
  if (!(rhs > 0.0)) throw Error(ErrorCode::ZeroDenominator, "Sobolev right side vanishes");
  return lhs / rhs;
}

std::vector<Eigen::VectorXd> sobolev_test_modal(int modes, int random_count, unsigned long long seed) {
  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd one = Eigen::VectorXd::Zero(modes);
  one(0) = 1.0;
  out.push_back(one);
  for (int k = 1; k <= std::min(6, modes - 1); ++k) {
    Eigen::VectorXd c = one;
    c(k) = 0.5;
    out.push_back(c);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int r = 0; r < random_count; ++r) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(modes);
    c(0) = 1.0;
    for (int k = 1; k < std::min(modes, 9); ++k) c(k) = 0.3 * nd(rng) / (k * k);
    out.push_back(c);
  }
  return out;
}

SobolevProbe sobolev_probe(const FlowTrajectory& traj, const std::vector<Eigen::VectorXd>& ensemble_modal, int n0,
                           const std::vector<double>& times) {
  if (ensemble_modal.empty()) throw Error(ErrorCode::RangeError, "empty test-function ensemble");
  SobolevProbe probe;
  probe.n0 = n0;
  const MetricState st0 = traj.state_at(0.0);
  probe.c0 = std::max(0.0, -st0.curvature().minCoeff()) + 1.0;
  const Grid& g = *traj.grid;
  for (double t : times) {
    const MetricState st = traj.state_at(t);
    double worst = 0.0;
    for (const auto& c : ensemble_modal) {
      if (c.size() != g.modes()) throw Error(ErrorCode::GridMismatch, "test function length");
      worst = std::max(worst, sobolev_ratio(st, ScalarField(traj.grid, g.to_nodal(c)), n0, probe.c0));
    }
    probe.times.push_back(t);
    probe.worst_ratio.push_back(worst);
  }
  const auto [mn, mx] = std::minmax_element(probe.worst_ratio.begin(), probe.worst_ratio.end());
  probe.a_emp = *mx;
  probe.variation = *mx > 0.0 ? (*mx - *mn) / *mx : 0.0;
  if (!std::isfinite(probe.a_emp)) throw Error(ErrorCode::SolveFailure, "non-finite Sobolev ratio");
  return probe;
}

}  // namespace krf
