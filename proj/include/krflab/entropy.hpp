#pragma once

// Perelman's W-entropy at tau = 1/2 in complex dimension one:
//   W(g, f) = (1/2 pi) int e^{-f} (R + |grad f|^2 + f - 2) dmu,   int e^{-f} dmu = 2 pi.

#include <vector>

#include "krflab/flow.hpp"
#include "krflab/geometry.hpp"

namespace krf {

struct WValue {
  double w = 0.0;           // direct form
  double w_f_form = 0.0;    // form in F = e^{-f/2} / sqrt(2 pi)
  double constraint = 0.0;  // |int e^{-f} dmu - 2 pi|
};

/// Throws ConstraintViolated if |int e^{-f} dmu - 2 pi| exceeds constraint_tol.
WValue w_functional(const MetricState& state, const ScalarField& f, double constraint_tol = 1e-8);

struct MuEstimate {
  double value = 0.0;  // W at the final iterate: an upper bound for mu
  int iterations = 0;
  std::vector<double> history;  // W per accepted iterate, non-increasing
  ScalarField minimizer;        // F = e^{-f/2} / sqrt(2 pi) at the final iterate
};

struct MuOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-10;
  double armijo = 1e-4;
};

/// Projected gradient descent for mu(g, 1/2) on the unit L^2 sphere of F, started at f = u.
/// Throws DescentStalled if the line search cannot reduce W while the gradient is still large.
MuEstimate mu_estimate(const MetricState& state, const MuOptions& opts = {});

struct EntropyRecord {
  double t = 0.0;
  double w = 0.0;
  double constraint = 0.0;
  double dwdt_fd = 0.0;      // centered difference of the recorded W values
  double dwdt_integrand = 0.0;  // (1/2 pi) int e^{-f} (|Ric + Hess f - g|^2 + |grad grad f|^2) dmu
};

struct CoupledOptions {
  StepController ctrl{1e-4, 1e-9, 2e-3, 1e-10, 0.5};
  /// Number of recording times on [0, T], t_j = T (j / (samples - 1))^2.
  int samples = 201;
};

/// Conjugate-heat coupling along the flow: e^{-f} solves the backward equation
/// d/dt e^{-f} = -Delta e^{-f} + (R - 1) e^{-f} with terminal data f_T at t = T = traj end.
std::vector<EntropyRecord> coupled_w_series(const FlowTrajectory& traj, const ScalarField& f_terminal,
                                            const CoupledOptions& opts = {});

/// The monotonicity integrand for an S^1-invariant f on a fixed metric.
double w_derivative_integrand(const MetricState& state, const ScalarField& f);

struct SobolevProbe {
  int n0 = 3;
  double c0 = 1.0;
  std::vector<double> times;
  std::vector<double> worst_ratio;  // per time, max over the ensemble
  double a_emp = 0.0;
  double variation = 0.0;  // (max - min) / max of worst_ratio over time
};

/// Ratio (int |F|^{2 n0/(n0-2)})^{(n0-2)/n0} / int (4 |grad F|^2 + (R + C0) F^2) for one field.
double sobolev_ratio(const MetricState& state, const ScalarField& f, int n0, double c0);

/// Default probe ensemble: constants, P_1..P_6 shifted positive, and seeded random smooth fields.
std::vector<Eigen::VectorXd> sobolev_test_modal(int modes, int random_count, unsigned long long seed);

SobolevProbe sobolev_probe(const FlowTrajectory& traj, const std::vector<Eigen::VectorXd>& ensemble_modal, int n0,
                           const std::vector<double>& times);

}  // namespace krf
