#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "krflab/error.hpp"
#include "krflab/parabolic.hpp"

using namespace krf;
using std::numbers::pi;

namespace {

FlowTrajectory perturbed_trajectory(int modes, double tol = 1e-9) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(modes);
  c(2) = 0.1;
  c(3) = -0.04;
  c(5) = 0.01;
  StepController ctrl;
  ctrl.tol = tol;
  return run(MetricState::from_modal(Grid::make(modes), c), 1.0, ctrl, {});
}

FlowTrajectory round_trajectory(int modes) { return run(round_state(Grid::make(modes)), 1.0, StepController{}, {}); }

double p2(double x) { return 0.5 * (3.0 * x * x - 1.0); }

ScalarField two_plus_p2(const GridPtr& g, double scale = 1.0) {
  Eigen::VectorXd v(g->modes());
  for (int i = 0; i < g->modes(); ++i) v(i) = scale * (2.0 + p2(g->nodes()[i]));
  return ScalarField(g, v);
}

}  // namespace

TEST_CASE("constants evolve by e^{a t}") {
  const auto traj = perturbed_trajectory(32);
  for (double a : {0.0, 0.7}) {
    const auto hr = evolve_heat(traj, ScalarField::constant(traj.grid, 3.0), a, 2.0);
    for (std::size_t i = 0; i < hr.times.size(); ++i) {
      CHECK((hr.fields[i].array() - 3.0 * std::exp(a * hr.times[i])).abs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("round sphere: 2 + P2 decays at rate 3, accumulator in closed form") {
  const auto traj = round_trajectory(24);
  const auto hr = evolve_heat(traj, two_plus_p2(traj.grid), 0.0, 2.0);
  for (std::size_t i = 0; i < hr.times.size(); ++i) {
    double err = 0.0;
    for (int j = 0; j < traj.grid->modes(); ++j) {
      const double x = traj.grid->nodes()[j];
      err = std::max(err, std::abs(hr.fields[i](j) - (2.0 + std::exp(-3.0 * hr.times[i]) * p2(x))));
    }
    CHECK(err <= 1e-6);
  }
  // int F^2 dmu = 2 pi (8 + (2/5) e^{-6t})
  const double exact = 2.0 * pi * (8.0 + 0.4 * (1.0 - std::exp(-6.0)) / 6.0);
  CHECK(hr.spacetime_lp() == doctest::Approx(exact).epsilon(1e-7));
  for (std::size_t i = 1; i < hr.accumulated.size(); ++i) CHECK(hr.accumulated[i] >= hr.accumulated[i - 1]);
}

TEST_CASE("negative data and bad parameters are rejected") {
  const auto traj = round_trajectory(16);
  const auto neg = ScalarField::legendre_mode(traj.grid, 1);
  try {
    evolve_heat(traj, neg, 0.0, 2.0);
    FAIL("expected NegativityDetected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NegativityDetected);
  }
  const auto one = ScalarField::constant(traj.grid, 1.0);
  CHECK_THROWS_AS(evolve_heat(traj, one, -1.0, 2.0), Error);
  CHECK_THROWS_AS(evolve_heat(traj, one, 0.0, 0.0), Error);
  CHECK_THROWS_AS(evolve_heat(traj, one, 0.0, 2.0, {}, {}, 2.0), Error);
  const auto other = round_trajectory(20);
  CHECK_THROWS_AS(evolve_heat(traj, ScalarField::constant(other.grid, 1.0), 0.0, 2.0), Error);
}

TEST_CASE("parabolic comparison on random ordered data") {
  const auto traj = perturbed_trajectory(32);
  const auto& g = traj.grid;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd ca = Eigen::VectorXd::Zero(32), cb = Eigen::VectorXd::Zero(32);
    ca(0) = 2.0;
    for (int k = 1; k < 6; ++k) ca(k) = 0.3 * nd(rng) / k;
    cb = ca;
    cb(0) += 0.5;
    for (int k = 1; k < 6; ++k) cb(k) += 0.05 * nd(rng) / k;
    const Eigen::VectorXd fa = g->to_nodal(ca), fb = g->to_nodal(cb);
    REQUIRE((fb - fa).minCoeff() >= 0.0);
    REQUIRE(fa.minCoeff() >= 0.0);
    const auto ra = evolve_heat(traj, ScalarField(g, fa), 0.3, 2.0);
    const auto rb = evolve_heat(traj, ScalarField(g, fb), 0.3, 2.0);
    REQUIRE(ra.times == rb.times);
    for (std::size_t i = 0; i < ra.times.size(); ++i) CHECK((rb.fields[i] - ra.fields[i]).minCoeff() >= -1e-8);
  }
}

TEST_CASE("mass identity d/dt int F dmu = int F (1 - R) dmu") {
  const auto traj = perturbed_trajectory(48);
  const auto& g = traj.grid;
  std::vector<double> times;
  for (int j = 1; j <= 100; ++j) times.push_back(0.01 * j);
  StepController tight;
  tight.tol = 1e-11;
  const auto hr = evolve_heat(traj, two_plus_p2(g), 0.0, 2.0, tight, times);
  REQUIRE(hr.times.size() == 101);
  const double h = 0.01;
  for (std::size_t i = 2; i + 2 < hr.times.size(); ++i) {
    const double fd = (hr.mass[i - 2] - 8.0 * hr.mass[i - 1] + 8.0 * hr.mass[i + 1] - hr.mass[i + 2]) / (12.0 * h);
    const MetricState st = traj.state_at(hr.times[i]);
    const Eigen::VectorXd integrand = hr.fields[i].cwiseProduct((1.0 - st.curvature().array()).matrix());
    CHECK(std::abs(fd - integrate(st, integrand)) <= 1e-6 * hr.mass[i]);
  }
}

TEST_CASE("Moser ratio: constants in closed form, scale invariance, refinement stability") {
  const auto traj = perturbed_trajectory(32);
  for (double p : {2.0, 5.0}) {
    const auto hr = evolve_heat(traj, ScalarField::constant(traj.grid, 1.7), 0.0, p);
    CHECK(moser_ratio(hr, 3) == doctest::Approx(1.0 / std::pow(4.0 * pi, 1.0 / p)).epsilon(1e-9));
  }

  const auto base = evolve_heat(traj, two_plus_p2(traj.grid), 0.2, 5.0);
  const auto scaled = evolve_heat(traj, two_plus_p2(traj.grid, 13.7), 0.2, 5.0);
  CHECK(std::abs(moser_ratio(scaled, 3) / moser_ratio(base, 3) - 1.0) <= 1e-10);

  CHECK_THROWS_AS(moser_ratio(evolve_heat(traj, ScalarField::constant(traj.grid, 0.0), 0.0, 2.0), 3), Error);

  const double coarse = moser_ratio(evolve_heat(round_trajectory(24), two_plus_p2(Grid::make(24)), 0.0, 2.0), 3);
  const auto fine_traj = round_trajectory(48);
  StepController fine;
  fine.tol = 1e-11;
  const double refined = moser_ratio(evolve_heat(fine_traj, two_plus_p2(fine_traj.grid), 0.0, 2.0, fine), 3);
  CHECK(std::isfinite(coarse));
  CHECK(std::abs(refined / coarse - 1.0) <= 0.1);
}
