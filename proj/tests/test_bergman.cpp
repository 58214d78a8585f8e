#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "krflab/bergman.hpp"
#include "krflab/error.hpp"
#include "krflab/flow.hpp"

using namespace krf;
using std::numbers::pi;

namespace {

double binom(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

Eigen::VectorXd random_potential(std::mt19937_64& rng, int n, double scale, bool even = false) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int k = 2; k < std::min(n, 9); ++k) {
    if (even && k % 2 == 1) continue;
    c(k) = scale * nd(rng) / (k * k);
  }
  return c;
}

}  // namespace

TEST_CASE("round sphere Gram data and kernel in closed form") {
  const auto g = Grid::make(64);
  const auto st = round_state(g);
  for (int l = 1; l <= 8; ++l) {
    const auto gram = gram_diagonal(st, l);
    for (int j = 0; j <= 2 * l; ++j) {
      CHECK(gram.g[j] == doctest::Approx(4 * pi / ((2 * l + 1) * binom(2 * l, j))).epsilon(1e-12));
    }
    const auto k = bergman_kernel(st, l);
    CHECK((k.rho.values().array() - (2 * l + 1) / (4 * pi)).abs().maxCoeff() <= 1e-10);
    CHECK(std::abs(k.trace - (2 * l + 1)) <= 1e-10);
    CHECK((k.eta.values() - k.rho.values()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK(bergman_kernel(st, 1).rho[5] == doctest::Approx(0.238732414637843).epsilon(1e-12));
}

TEST_CASE("trace, symmetry and Hermitian-choice invariance on random states") {
  std::mt19937_64 rng(17);
  const auto g = Grid::make(64);
  for (int trial = 0; trial < 4; ++trial) {
    const auto st = MetricState::from_modal(g, random_potential(rng, 64, 0.3, trial % 2 == 0));
    for (int l = 1; l <= 6; ++l) {
      const auto k = bergman_kernel(st, l);
      CHECK(std::abs(k.trace - (2 * l + 1)) <= 1e-8);
      CHECK(k.rho.min() > 0.0);
      const auto kv = bergman_kernel(st, l, HermitianChoice::VolumeForm);
      CHECK((kv.rho.values() - k.rho.values()).cwiseAbs().maxCoeff() <= 1e-8);
      if (trial % 2 == 0) {
        const auto gram = gram_diagonal(st, l);
        for (int j = 0; j <= 2 * l; ++j) CHECK(gram.g[j] == doctest::Approx(gram.g[2 * l - j]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("scaling the Hermitian metric leaves the kernel unchanged") {
  std::mt19937_64 rng(2);
  const auto g = Grid::make(48);
  Eigen::VectorXd c = random_potential(rng, 48, 0.3);
  const auto st = MetricState::from_modal(g, c);
  c(0) += 0.7;  // v -> v + const
  const auto shifted = MetricState::from_modal(g, c);
  for (int l = 1; l <= 4; ++l) {
    const auto [lo, hi] = kernel_ratio(st, shifted, l);
    CHECK(std::abs(lo - 1.0) <= 1e-10);
    CHECK(std::abs(hi - 1.0) <= 1e-10);
  }
}

TEST_CASE("dense Gram path under random unitary mixing matches the diagonal path") {
  std::mt19937_64 rng(4);
  const auto g = Grid::make(48);
  const auto st = MetricState::from_modal(g, random_potential(rng, 48, 0.3));
  for (int l = 1; l <= 4; ++l) {
    const auto diag = bergman_kernel(st, l).rho.values();
    const auto dense = bergman_kernel_dense(st, l, 1000 + l).values();
    CHECK((dense - diag).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("eta dominates every unit section and equals rho") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  const auto g = Grid::make(48);
  const auto st = MetricState::from_modal(g, random_potential(rng, 48, 0.3));
  for (int l = 1; l <= 3; ++l) {
    const auto k = bergman_kernel(st, l);
    Eigen::VectorXd best = Eigen::VectorXd::Zero(48);
    for (int r = 0; r < 200; ++r) {
      std::vector<double> a(2 * l + 1);
      for (auto& v : a) v = nd(rng);
      const auto s = section_norm(st, l, a);
      CHECK((s.values() - k.eta.values()).maxCoeff() <= 1e-12);
      best = best.cwiseMax(s.values());
    }
    CHECK((k.eta.values() - k.rho.values()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((k.rho.values() / (2.0 * l + 1) - k.eta.values()).maxCoeff() <= 0.0);
    // the extremal section at a node is sum_j sqrt(E_j(x)/G_j) z^j / sqrt(G_j) up to normalization
    const auto gram = gram_diagonal(st, l);
    const int i = 17;
    const double x = g->nodes()[i];
    std::vector<double> a(2 * l + 1);
    for (int j = 0; j <= 2 * l; ++j) {
      const double ej = std::pow(1 + x, j) * std::pow(1 - x, 2 * l - j) * std::exp(-l * st.f()(i)) / std::pow(4.0, l);
      a[j] = std::sqrt(ej) / gram.g[j];
    }
    CHECK(section_norm(st, l, a)[i] == doctest::Approx(k.rho[i]).epsilon(1e-12));
  }
}

TEST_CASE("section identity Delta |S|^2 = |grad S|^2 - l |S|^2") {
  const auto g = Grid::make(64);
  const auto round = round_state(g);
  const auto r = section_identity_residual(round, 1, 1);
  CHECK(r.sup_residual <= 1e-7);
  std::mt19937_64 rng(12);
  const auto st = MetricState::from_modal(g, random_potential(rng, 64, 0.25));
  for (int l = 1; l <= 4; ++l) {
    for (int j = 0; j <= 2 * l; ++j) {
      const auto res = section_identity_residual(st, l, j);
      CHECK(res.integrated <= 1e-8);
      CHECK(res.sup_residual <= 1e-7);
    }
  }
}

TEST_CASE("kernel ratio along a flow and Hermitian cross-check") {
  const auto g = Grid::make(64);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(64);
  c(2) = 0.12;
  c(3) = -0.05;
  const auto st = MetricState::from_modal(g, c);
  const auto traj = run(st, 1.0, StepController{}, {0.5, 1.0});
  const auto& s0 = traj.snapshots.front();
  const auto& s1 = *traj.snapshot_at(1.0);
  for (int l = 1; l <= 4; ++l) {
    const auto [lo, hi] = kernel_ratio(s1.state, s0.state, l);
    CHECK(lo > 0.0);
    CHECK(std::isfinite(hi));
    // rho_s through H_s = H_0 e^{c_s - f_s} on omega_s must reproduce rho_s
    const Eigen::VectorXd ratio = hermitian_log_ratio(traj, 1.0).values();
    const Eigen::VectorXd h0 = s0.state.log_w() + s0.state.h();
    const Eigen::VectorXd lw = g->to_modal(l * (h0 + ratio));
    const auto via_ratio = bergman_kernel_with_log_weight(s1.state, l, lw);
    const auto direct = bergman_kernel(s1.state, l);
    CHECK((via_ratio.rho.values() - direct.rho.values()).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("level range is enforced") {
  const auto st = round_state(Grid::make(16));
  CHECK_THROWS_AS(bergman_kernel(st, 0), Error);
  CHECK_THROWS_AS(bergman_kernel(st, 17), Error);
  BergmanOptions opts;
  opts.max_level = 20;
  CHECK_NOTHROW(bergman_kernel(st, 17, HermitianChoice::Potential, opts));
}
