#include "krflab/profile.hpp"

#include <algorithm>
#include <cmath>

#include "krflab/error.hpp"
#include "krflab/legendre.hpp"
#include "krflab/quadrature.hpp"

namespace krf {
namespace {

constexpr int kDenseSamples = 2001;

void project_closure(std::vector<double>& c) {
  if (c.size() < 2) c.resize(2, 0.0);
  c[0] = 1.0;
  c[1] = 0.0;
}

// Clip at the Lobatto points of the coefficient grid, then re-interpolate.
std::vector<double> clip_below(const std::vector<double>& c, double floor) {
  const int n = std::max<int>(static_cast<int>(c.size()), 8);
  const Grid g(n);
  std::vector<double> padded(c);
  padded.resize(n, 0.0);
  Eigen::VectorXd vals = g.to_nodal(to_eigen(padded));
  for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = std::max(vals(i), floor);
  return to_std(g.to_modal(vals));
}

double node_min(const std::vector<double>& c) {
  const int n = std::max<int>(static_cast<int>(c.size()), 8);
  const Grid g(n);
  std::vector<double> padded(c);
  padded.resize(n, 0.0);
  return g.to_nodal(to_eigen(padded)).minCoeff();
}

}  // namespace

CurvatureProfile CurvatureProfile::finish(std::vector<double> coeffs, double lower_bound, const ProfileOptions& opts) {
  if (!(lower_bound > 0.0)) throw Error(ErrorCode::ProfileInfeasible, "lower bound R0 must be positive");
  if (coeffs.size() < 2) coeffs.resize(2, 0.0);
  CurvatureProfile p;
  p.coeffs_ = std::move(coeffs);
  p.lower_bound_ = lower_bound;
  if (opts.project) {
    project_closure(p.coeffs_);
    for (int pass = 0; pass < opts.clip_passes && node_min(p.coeffs_) < lower_bound; ++pass) {
      p.coeffs_ = clip_below(p.coeffs_, lower_bound);
      project_closure(p.coeffs_);
    }
  } else if (p.closure_residual() > opts.closure_tol) {
    throw Error(ErrorCode::ClosureViolation,
                "closure residual " + std::to_string(p.closure_residual()) + " exceeds tolerance");
  }
  const double kmin = p.sampled_min();
  if (!(kmin > 0.0)) throw Error(ErrorCode::ProfileInfeasible, "curvature profile is not positive");
  // the achieved bound; clipping can leave a small undershoot between nodes
  p.lower_bound_ = std::min(lower_bound, kmin);
  return p;
}

CurvatureProfile CurvatureProfile::from_samples(const std::vector<double>& samples, double lower_bound,
                                                const ProfileOptions& opts) {
  if (samples.size() < 4) throw Error(ErrorCode::ProfileInfeasible, "need at least 4 curvature samples");
  const Grid g(static_cast<int>(samples.size()));
  return finish(to_std(g.to_modal(to_eigen(samples))), lower_bound, opts);
}

CurvatureProfile CurvatureProfile::from_function(const std::function<double(double)>& k, int points,
                                                 double lower_bound, const ProfileOptions& opts) {
  const Grid g(points);
  std::vector<double> samples(points);
  for (int i = 0; i < points; ++i) samples[i] = k(g.nodes()[i]);
  return from_samples(samples, lower_bound, opts);
}

CurvatureProfile CurvatureProfile::from_coefficients(std::vector<double> coeffs, double lower_bound,
                                                     const ProfileOptions& opts) {
  return finish(std::move(coeffs), lower_bound, opts);
}

double CurvatureProfile::operator()(double tau) const { return legendre::eval(coeffs_, tau); }

double CurvatureProfile::sampled_min() const {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kDenseSamples; ++i) {
    const double tau = -1.0 + 2.0 * i / (kDenseSamples - 1.0);
    m = std::min(m, (*this)(tau));
  }
  return m;
}

double CurvatureProfile::closure_residual() const {
  // int K = 2 c0, int tau K = (2/3) c1
  const double c0 = coeffs_.empty() ? 0.0 : coeffs_[0];
  const double c1 = coeffs_.size() > 1 ? coeffs_[1] : 0.0;
  const double total = 2.0 * c0;
  const double first = total - 2.0 / 3.0 * c1;
  return std::abs(total - 2.0) + std::abs(first - 2.0);
}

MetricState state_from_curvature_profile(const CurvatureProfile& profile, GridPtr grid, const Tolerances& tol) {
  const auto& kc = profile.coefficients();
  const int m = static_cast<int>(kc.size());

  // phi0 - phi = (1 - tau^2)^2 D with D = S'', S_k = K_k / ((k-1)k(k+1)(k+2)).
  std::vector<double> s(std::max(m, 3), 0.0);
  for (int k = 2; k < m; ++k) s[k] = kc[k] / ((k - 1.0) * k * (k + 1.0) * (k + 2.0));
  const std::vector<double> d = legendre::derivative(legendre::derivative(s));

  auto q_of = [&](double tau) { return 1.0 - 2.0 * (1.0 - tau * tau) * legendre::eval(d, tau); };

  for (int i = 0; i < kDenseSamples; ++i) {
    const double tau = -1.0 + 2.0 * i / (kDenseSamples - 1.0);
    if (!(q_of(tau) > 0.0)) throw Error(ErrorCode::ProfileInfeasible, "momentum profile is not positive");
  }

  // s(tau) = 2 atanh(tau) + G(tau), G' = 4 D / q, G(0) = 0.
  const int ng = 2 * m + 64;
  const quad::Rule gl = quad::gauss_legendre(ng);
  std::vector<double> gc(ng, 0.0);
  for (int i = 0; i < ng; ++i) {
    const double tau = gl.nodes[i];
    const double gval = 4.0 * legendre::eval(d, tau) / q_of(tau);
    const auto p = legendre::values(ng - 1, tau);
    for (int k = 0; k < ng; ++k) gc[k] += 0.5 * (2.0 * k + 1.0) * gl.weights[i] * gval * p[k];
  }
  std::vector<double> big_g = legendre::antiderivative(gc);
  big_g[0] -= legendre::eval(big_g, 0.0);

  // x(tau) = tanh(atanh(tau) + G/2) = (tau + T) / (1 + tau T), T = tanh(G/2)
  auto x_of = [&](double tau, double& t_out) {
    const double t = std::tanh(0.5 * legendre::eval(big_g, tau));
    t_out = t;
    return (tau + t) / (1.0 + tau * t);
  };

  const auto& xs = grid->nodes();
  const int n = grid->modes();
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    const double target = xs[i];
    double tau = target;
    double t = 0.0;
    if (target <= -1.0 || target >= 1.0) {
      tau = target;
      x_of(tau, t);
    } else {
      double lo = -1.0, hi = 1.0;
      for (int it = 0; it < 200; ++it) {
        const double xv = x_of(tau, t);
        const double err = xv - target;
        if (err > 0.0) hi = tau; else lo = tau;
        if (std::abs(err) < 1e-16 || hi - lo < 1e-16) break;
        double gval = 0.0, gder = 0.0;
        legendre::eval_with_derivative(big_g, tau, gval, gder);
        const double slope = (1.0 - xv * xv) * (1.0 / (1.0 - tau * tau) + 0.5 * gder);
        double next = tau - err / slope;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        tau = next;
      }
      x_of(tau, t);
    }
    // w = phi / ((1 - x^2)/2) = q (1 + tau T)^2 / (1 - T^2)
    w(i) = q_of(tau) * (1.0 + tau * t) * (1.0 + tau * t) / (1.0 - t * t);
  }

  const Eigen::VectorXd wc = grid->to_modal(w);
  Eigen::VectorXd fc = Eigen::VectorXd::Zero(n);
  for (int k = 1; k < n; ++k) fc(k) = wc(k) / grid->laplacian_symbol()(k);
  fc(0) = -legendre::eval(std::span<const double>(fc.data(), fc.size()), 0.0);
  return MetricState::from_modal(std::move(grid), std::move(fc), tol);
}

double profile_round_trip_error(const CurvatureProfile& profile, const MetricState& state) {
  const Eigen::VectorXd tau = state.moment();
  double err = 0.0;
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    err = std::max(err, std::abs(state.curvature()(i) - profile(tau(i))));
  }
  return err;
}

}  // namespace krf
