#include "krflab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "krflab/error.hpp"
#include "krflab/legendre.hpp"
#include "krflab/quadrature.hpp"

namespace krf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PositivityLoss: return "PositivityLoss";
    case ErrorCode::ProfileInfeasible: return "ProfileInfeasible";
    case ErrorCode::ClosureViolation: return "ClosureViolation";
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SolveFailure: return "SolveFailure";
    case ErrorCode::StepRejected: return "StepRejected";
    case ErrorCode::DtUnderflow: return "DtUnderflow";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::NegativityDetected: return "NegativityDetected";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::ConstraintViolated: return "ConstraintViolated";
    case ErrorCode::DescentStalled: return "DescentStalled";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void require_same_grid(const GridPtr& a, const GridPtr& b) {
  if (!a || !b || (a != b && a->modes() != b->modes())) {
    throw Error(ErrorCode::GridMismatch, "fields live on different grids");
  }
}

// ---------------------------------------------------------------- ScalarField

ScalarField::ScalarField(GridPtr grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_ || values_.size() != grid_->modes()) {
    throw Error(ErrorCode::GridMismatch, "field length does not match grid");
  }
  if (!values_.allFinite()) throw Error(ErrorCode::SolveFailure, "non-finite field values");
}

ScalarField ScalarField::constant(GridPtr grid, double c) {
  const int n = grid->modes();
  return ScalarField(std::move(grid), Eigen::VectorXd::Constant(n, c));
}

ScalarField ScalarField::legendre_mode(GridPtr grid, int k, double amplitude) {
  Eigen::VectorXd vals(grid->modes());
  for (int i = 0; i < grid->modes(); ++i) vals(i) = amplitude * legendre::values(k, grid->nodes()[i])[k];
  return ScalarField(std::move(grid), std::move(vals));
}

Parity ScalarField::parity(double tol) const {
  const Eigen::Index n = values_.size();
  const double scale = std::max(1.0, sup_abs());
  double even_err = 0.0, odd_err = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    even_err = std::max(even_err, std::abs(values_(i) - values_(n - 1 - i)));
    odd_err = std::max(odd_err, std::abs(values_(i) + values_(n - 1 - i)));
  }
  if (even_err <= tol * scale) return Parity::Even;
  if (odd_err <= tol * scale) return Parity::Odd;
  return Parity::None;
}

// ---------------------------------------------------------------- MetricState

MetricState MetricState::from_modal(GridPtr grid, Eigen::VectorXd f_modal, const Tolerances& tol) {
  if (!grid || f_modal.size() != grid->modes()) throw Error(ErrorCode::GridMismatch, "coefficient count mismatch");
  MetricState st;
  st.grid_ = std::move(grid);
  st.f_modal_ = std::move(f_modal);
  st.build(tol);
  return st;
}

MetricState MetricState::from_nodal(GridPtr grid, const Eigen::VectorXd& f_nodal, const Tolerances& tol) {
  if (!grid || f_nodal.size() != grid->modes()) throw Error(ErrorCode::GridMismatch, "node count mismatch");
  Eigen::VectorXd modal = grid->to_modal(f_nodal);
  return from_modal(std::move(grid), std::move(modal), tol);
}

void MetricState::build(const Tolerances& tol) {
  tol_ = tol;
  const Grid& g = *grid_;
  const int n = g.modes();
  if (!f_modal_.allFinite()) throw Error(ErrorCode::SolveFailure, "non-finite potential coefficients");

  f_ = g.to_nodal(f_modal_);
  const auto dc = legendre::derivative(std::span<const double>(f_modal_.data(), f_modal_.size()));
  const auto ddc = legendre::derivative(dc);
  f_x_ = g.to_nodal(to_eigen(dc));
  f_xx_ = g.to_nodal(to_eigen(ddc));
  w_ = Eigen::VectorXd::Ones(n) + g.to_nodal(g.laplacian_symbol().cwiseProduct(f_modal_));

  const double wmin = w_.minCoeff();
  if (!(wmin > tol.w_floor)) {
    std::ostringstream os;
    os << "min density ratio " << wmin << " <= floor " << tol.w_floor;
    throw Error(ErrorCode::PositivityLoss, os.str());
  }
  log_w_ = w_.array().log().matrix();
  r_ = (Eigen::VectorXd::Ones(n) - g.round_laplacian(log_w_)).cwiseQuotient(w_);

  volume_ = kTwoPi * g.quadrature(w_);
  curvature_integral_ = kTwoPi * g.quadrature(r_.cwiseProduct(w_));
  if (std::abs(volume_ - kVolume) > tol.vol) {
    throw Error(ErrorCode::SolveFailure, "volume drifted from 4 pi: " + std::to_string(volume_));
  }
  if (std::abs(curvature_integral_ - kVolume) > tol.gauss_bonnet) {
    throw Error(ErrorCode::SolveFailure, "Gauss-Bonnet violated: " + std::to_string(curvature_integral_));
  }

  // Spectral Poisson solve: Delta0 u = w (1 - R); the k = 0 coefficient is the
  // compatibility residual and must vanish.
  const Eigen::VectorXd rhs = g.to_modal(w_.cwiseProduct(Eigen::VectorXd::Ones(n) - r_));
  if (std::abs(rhs(0)) > tol.pde) {
    throw Error(ErrorCode::SolveFailure, "Poisson right side not mean-free: " + std::to_string(rhs(0)));
  }
  Eigen::VectorXd u_modal = Eigen::VectorXd::Zero(n);
  for (int k = 1; k < n; ++k) u_modal(k) = rhs(k) / g.laplacian_symbol()(k);
  Eigen::VectorXd u = g.to_nodal(u_modal);
  const Eigen::VectorXd eu = (-u).array().exp().matrix();
  const double mass = kTwoPi * g.quadrature(eu.cwiseProduct(w_));
  if (!(mass > 0.0) || !std::isfinite(mass)) throw Error(ErrorCode::SolveFailure, "Ricci potential normalization failed");
  u.array() += std::log(mass / kTwoPi);
  u_ = u;

  const Eigen::VectorXd lap_u = g.round_laplacian(u_).cwiseQuotient(w_);
  const double residual = (lap_u - (Eigen::VectorXd::Ones(n) - r_)).cwiseAbs().maxCoeff();
  if (residual > tol.pde) {
    throw Error(ErrorCode::SolveFailure, "Ricci potential residual " + std::to_string(residual));
  }
  const double norm_err =
      std::abs(kTwoPi * g.quadrature((-u_).array().exp().matrix().cwiseProduct(w_)) - kTwoPi);
  if (norm_err > tol.norm) throw Error(ErrorCode::SolveFailure, "Ricci potential normalization residual");
}

Eigen::VectorXd MetricState::h_volume_gauge() const {
  Eigen::VectorXd h = -u_;
  h.array() += std::log(kVolume / kTwoPi);
  return h;
}

Eigen::VectorXd MetricState::moment() const {
  const auto& x = grid_->nodes();
  Eigen::VectorXd tau(grid_->modes());
  for (int i = 0; i < grid_->modes(); ++i) tau(i) = x[i] + 0.5 * (1.0 - x[i] * x[i]) * f_x_(i);
  return tau;
}

MetricState round_state(GridPtr grid, const Tolerances& tol) {
  const int n = grid->modes();
  return MetricState::from_modal(std::move(grid), Eigen::VectorXd::Zero(n), tol);
}

// ---------------------------------------------------------------- operations

DensityCurvature density_and_curvature(const Grid& g, const Eigen::VectorXd& f_modal) {
  const int n = g.modes();
  DensityCurvature out;
  out.w = Eigen::VectorXd::Ones(n) + g.to_nodal(g.laplacian_symbol().cwiseProduct(f_modal));
  if (!(out.w.minCoeff() > 0.0)) throw Error(ErrorCode::PositivityLoss, "density ratio is not positive");
  out.r = (Eigen::VectorXd::Ones(n) - g.round_laplacian(out.w.array().log().matrix())).cwiseQuotient(out.w);
  return out;
}

ScalarField density_ratio(const MetricState& state) {
  if (!(state.min_density() > state.tolerances().w_floor)) {
    throw Error(ErrorCode::PositivityLoss, "density ratio below floor");
  }
  return {state.grid(), state.w()};
}

ScalarField scalar_curvature(const MetricState& state) { return {state.grid(), state.curvature()}; }

ScalarField laplacian(const MetricState& state, const ScalarField& field) {
  require_same_grid(state.grid(), field.grid());
  return {state.grid(), state.grid()->round_laplacian(field.values()).cwiseQuotient(state.w())};
}

ScalarField gradient_field(const MetricState& state, const ScalarField& field) {
  require_same_grid(state.grid(), field.grid());
  const auto& x = state.grid()->nodes();
  const Eigen::VectorXd fx = state.grid()->dx(field.values());
  Eigen::VectorXd out(fx.size());
  for (Eigen::Index i = 0; i < fx.size(); ++i) {
    out(i) = 0.5 * (1.0 - x[i] * x[i]) * fx(i) * fx(i) / state.w()(i);
  }
  return {state.grid(), std::move(out)};
}

double integrate(const MetricState& state, const Eigen::VectorXd& nodal) {
  if (nodal.size() != state.grid()->modes()) throw Error(ErrorCode::GridMismatch, "integrand length");
  return kTwoPi * state.grid()->quadrature(nodal.cwiseProduct(state.w()));
}

double integrate(const MetricState& state, const ScalarField& field) {
  require_same_grid(state.grid(), field.grid());
  return integrate(state, field.values());
}

namespace {

// sqrt(w(-cos theta)) integrated over [theta_a, theta_b]
double arc_length(const Eigen::VectorXd& w_modal, const quad::Rule& ref, double theta_a, double theta_b,
                  double w_floor) {
  const quad::Rule rule = quad::mapped(ref, theta_a, theta_b);
  std::span<const double> c(w_modal.data(), w_modal.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double wv = legendre::eval(c, -std::cos(rule.nodes[i]));
    if (!(wv > w_floor)) throw Error(ErrorCode::DegenerateMetric, "density collapses along the meridian");
    sum += rule.weights[i] * std::sqrt(wv);
  }
  return sum;
}

double theta_of(double x) { return std::acos(std::clamp(-x, -1.0, 1.0)); }

}  // namespace

double meridian_distance(const MetricState& state, double x1, double x2) {
  if (x1 < -1.0 || x1 > 1.0 || x2 < -1.0 || x2 > 1.0) throw Error(ErrorCode::RangeError, "x outside [-1, 1]");
  const Eigen::VectorXd wm = state.w_modal();
  const int n = std::max(64, state.grid()->modes() + 16);
  static thread_local std::pair<int, quad::Rule> cache{0, {}};
  if (cache.first != n) cache = {n, quad::gauss_legendre(n)};
  const double a = theta_of(std::min(x1, x2));
  const double b = theta_of(std::max(x1, x2));
  if (a == b) return 0.0;
  return arc_length(wm, cache.second, a, b, state.tolerances().w_floor);
}

double diameter_proxy(const MetricState& state) { return meridian_distance(state, -1.0, 1.0); }

Eigen::VectorXd meridian_distances_from(const MetricState& state, double x_from) {
  const auto& x = state.grid()->nodes();
  const int n = state.grid()->modes();
  const Eigen::VectorXd wm = state.w_modal();
  const quad::Rule ref = quad::gauss_legendre(16);
  const double w_floor = state.tolerances().w_floor;
  // cumulative arc length from the south pole at each node
  Eigen::VectorXd cum(n);
  cum(0) = 0.0;
  for (int i = 1; i < n; ++i) cum(i) = cum(i - 1) + arc_length(wm, ref, theta_of(x[i - 1]), theta_of(x[i]), w_floor);
  const double from = meridian_distance(state, -1.0, x_from);
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = std::abs(cum(i) - from);
  return d;
}

}  // namespace krf
