#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "krflab/error.hpp"
#include "krflab/geometry.hpp"
#include "krflab/legendre.hpp"
#include "krflab/profile.hpp"

using namespace krf;
using std::numbers::pi;

namespace {

Eigen::VectorXd single_mode(int n, int k, double a) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  c(k) = a;
  return c;
}

// R = -(log v'')_ss / v'' by Richardson-extrapolated central differences in s, with v'' = w (1 - x^2) / 2.
double curvature_by_differences(const MetricState& st, double s) {
  const Eigen::VectorXd wm = st.w_modal();
  std::span<const double> c(wm.data(), wm.size());
  auto log_vpp = [&](double t) {
    const double x = std::tanh(0.5 * t);
    return std::log(legendre::eval(c, x) * 0.5 * (1.0 - x * x));
  };
  auto d2 = [&](double h) { return (log_vpp(s + h) - 2.0 * log_vpp(s) + log_vpp(s - h)) / (h * h); };
  const double second = (4.0 * d2(1e-3) - d2(2e-3)) / 3.0;
  const double x = std::tanh(0.5 * s);
  return -second / (legendre::eval(c, x) * 0.5 * (1.0 - x * x));
}

Eigen::VectorXd random_potential(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int k = 2; k < std::min(n, 9); ++k) c(k) = scale * nd(rng) / (k * k);
  return c;
}

}  // namespace

TEST_CASE("round sphere invariants") {
  const auto g = Grid::make(32);
  const auto st = round_state(g);
  CHECK((st.curvature().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(st.volume() == doctest::Approx(4 * pi).epsilon(1e-14));
  CHECK(st.curvature_integral() == doctest::Approx(4 * pi).epsilon(1e-13));
  // int e^{-u} dmu = 2 pi with u constant forces u = log 2
  CHECK((st.u().array() - std::log(2.0)).abs().maxCoeff() < 1e-12);
  CHECK(st.h_volume_gauge().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(diameter_proxy(st) == doctest::Approx(pi).epsilon(1e-12));
  CHECK(meridian_distance(st, -1.0, 0.0) == doctest::Approx(pi / 2).epsilon(1e-12));
  // x = -cos(theta): the point x = 0.5 sits at theta = 2 pi / 3
  CHECK(meridian_distance(st, -1.0, 0.5) == doctest::Approx(2 * pi / 3).epsilon(1e-12));
}

TEST_CASE("curvature matches a finite-difference oracle") {
  std::mt19937_64 rng(11);
  const auto g = Grid::make(96);
  for (int trial = 0; trial < 5; ++trial) {
    const auto st = MetricState::from_modal(g, random_potential(rng, 96, 0.2));
    for (double s : {-3.0, -1.2, 0.0, 0.7, 2.5}) {
      const double x = std::tanh(0.5 * s);
      CHECK(g->interpolate(st.curvature(), x) == doctest::Approx(curvature_by_differences(st, s)).epsilon(1e-5));
    }
  }
}

TEST_CASE("Ricci potential equals f + log w up to a constant") {
  std::mt19937_64 rng(3);
  const auto g = Grid::make(40);
  for (int trial = 0; trial < 5; ++trial) {
    const auto st = MetricState::from_modal(g, random_potential(rng, 40, 0.3));
    const Eigen::VectorXd diff = st.u() - st.f() - st.log_w();
    CHECK(diff.maxCoeff() - diff.minCoeff() < 1e-10);
    CHECK(integrate(st, (-st.u()).array().exp().matrix()) == doctest::Approx(2 * pi).epsilon(1e-12));
  }
}

TEST_CASE("P2 perturbation: density and curvature to first order") {
  const auto g = Grid::make(32);
  const double eps = 1e-5;
  const auto st = MetricState::from_modal(g, single_mode(32, 2, eps));
  for (int i = 0; i < 32; ++i) {
    const double x = g->nodes()[i];
    const double p2 = 0.5 * (3 * x * x - 1);
    CHECK(st.w()(i) == doctest::Approx(1.0 - 3.0 * eps * p2).epsilon(1e-14));
    // linearized R = (1 - Delta0 log w)/w: 1 + 3 eps P2 - 9 eps P2
    CHECK(std::abs(st.curvature()(i) - (1.0 - 6.0 * eps * p2)) < 100 * eps * eps);
  }
  CHECK(scalar_curvature(st).parity() == Parity::Even);
}

TEST_CASE("Laplacian integrates to zero and Gauss-Bonnet holds for random states") {
  std::mt19937_64 rng(5);
  const auto g = Grid::make(40);
  for (int trial = 0; trial < 10; ++trial) {
    const auto st = MetricState::from_modal(g, random_potential(rng, 40, 0.2));
    CHECK(st.volume() == doctest::Approx(4 * pi).epsilon(1e-12));
    CHECK(st.curvature_integral() == doctest::Approx(4 * pi).epsilon(1e-10));
    const auto field = ScalarField::legendre_mode(g, 3, 1.0);
    const double total = integrate(st, laplacian(st, field));
    CHECK(std::abs(total) < 1e-11);
    // int |grad F|^2 dmu = -int F Delta F dmu
    const double dirichlet = integrate(st, gradient_field(st, field));
    const double pairing = -integrate(st, field.values().cwiseProduct(laplacian(st, field).values()));
    CHECK(dirichlet == doctest::Approx(pairing).epsilon(1e-10));
  }
}

TEST_CASE("Dirichlet energy is conformally invariant in one complex dimension") {
  std::mt19937_64 rng(9);
  const auto g = Grid::make(40);
  const auto st = MetricState::from_modal(g, random_potential(rng, 40, 0.2));
  const auto field = ScalarField::legendre_mode(g, 4, 1.0);
  // round value: 2 pi * k(k+1)/2 * 2/(2k+1)
  CHECK(integrate(st, gradient_field(st, field)) == doctest::Approx(2 * pi * 10.0 * 2.0 / 9.0).epsilon(1e-11));
}

TEST_CASE("positivity loss and grid mismatch are reported") {
  const auto g = Grid::make(16);
  try {
    (void)MetricState::from_modal(g, single_mode(16, 2, 0.5));
    FAIL("expected PositivityLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PositivityLoss);
  }
  const auto st = round_state(g);
  const auto other = ScalarField::constant(Grid::make(20), 1.0);
  try {
    (void)laplacian(st, other);
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridMismatch);
  }
  try {
    (void)meridian_distance(st, -1.5, 0.0);
    FAIL("expected RangeError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RangeError);
  }
}

TEST_CASE("meridian distances from a pole are monotone and consistent") {
  std::mt19937_64 rng(21);
  const auto g = Grid::make(32);
  const auto st = MetricState::from_modal(g, random_potential(rng, 32, 0.3));
  const Eigen::VectorXd d = meridian_distances_from(st, -1.0);
  for (int i = 1; i < 32; ++i) CHECK(d(i) > d(i - 1));
  CHECK(d(31) == doctest::Approx(diameter_proxy(st)).epsilon(1e-10));
}

TEST_CASE("constant curvature profile reproduces the round metric") {
  const auto g = Grid::make(32);
  const auto prof = CurvatureProfile::from_function([](double) { return 1.0; }, 16, 0.5);
  const auto st = state_from_curvature_profile(prof, g);
  CHECK(st.f_modal().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(profile_round_trip_error(prof, st) < 1e-10);
}

TEST_CASE("profile to metric round trip") {
  const auto g = Grid::make(64);
  for (double a : {0.2, 0.5}) {
    auto k = [a](double t) { return 1.0 + a * 0.5 * (3 * t * t - 1) + 0.1 * a * t * t * t; };
    const auto prof = CurvatureProfile::from_function(k, 24, 0.3);
    CHECK(prof.closure_residual() < 1e-13);
    const auto st = state_from_curvature_profile(prof, g);
    CHECK(profile_round_trip_error(prof, st) < 1e-6);
    CHECK(st.curvature().minCoeff() >= prof.lower_bound() - 1e-6);
  }
}

TEST_CASE("closure violation without projection") {
  ProfileOptions opts;
  opts.project = false;
  try {
    (void)CurvatureProfile::from_coefficients({0.9}, 0.5, opts);
    FAIL("expected ClosureViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClosureViolation);
  }
  // with projection the same data is accepted and closed
  const auto p = CurvatureProfile::from_coefficients({0.9}, 0.5);
  CHECK(p.closure_residual() < 1e-14);
  try {
    (void)CurvatureProfile::from_coefficients({1.0}, 0.0);
    FAIL("expected ProfileInfeasible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProfileInfeasible);
  }
}

TEST_CASE("spectral convergence of curvature under refinement") {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(8);
  c(2) = 0.15;
  c(3) = -0.05;
  c(5) = 0.02;
  double prev = 1.0;
  const double x0 = 0.37;
  const auto ref_grid = Grid::make(96);
  Eigen::VectorXd cref = Eigen::VectorXd::Zero(96);
  cref.head(8) = c;
  const auto ref = MetricState::from_modal(ref_grid, cref);
  const double r_ref = ref_grid->interpolate(ref.curvature(), x0);
  for (int n : {16, 32, 48, 64}) {
    Eigen::VectorXd cn = Eigen::VectorXd::Zero(n);
    cn.head(8) = c;
    const auto st = MetricState::from_modal(Grid::make(n), cn);
    const double err = std::abs(st.grid()->interpolate(st.curvature(), x0) - r_ref);
    CHECK(err <= prev);
    prev = std::max(err, 1e-14);
  }
  CHECK(prev < 1e-9);
}
