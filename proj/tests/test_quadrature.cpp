#include <cmath>
#include <random>

#include "doctest.h"
#include "krflab/grid.hpp"
#include "krflab/legendre.hpp"
#include "krflab/quadrature.hpp"

using namespace krf;

namespace {

// int_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
double beta_moment(double a, double b) {
  return std::exp((a + b + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                  std::lgamma(a + b + 2.0));
}

}  // namespace

TEST_CASE("Gauss-Jacobi integrates weighted polynomials exactly") {
  for (auto [a, b] : {std::pair{0.0, 0.0}, {2.0, 0.0}, {3.0, 5.0}, {16.0, 16.0}, {0.0, 32.0}}) {
    const auto rule = quad::gauss_jacobi(20, a, b);
    // (1-x)^2 (1+x)^3 times the weight is a Beta moment
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x = rule.nodes[i];
      sum += rule.weights[i] * (1 - x) * (1 - x) * (1 + x) * (1 + x) * (1 + x);
    }
    CHECK(sum == doctest::Approx(beta_moment(a + 2, b + 3)).epsilon(1e-12));
  }
}

TEST_CASE("Lobatto rule: endpoints, symmetry, exactness") {
  const auto rule = quad::gauss_lobatto(17);
  CHECK(rule.nodes.front() == -1.0);
  CHECK(rule.nodes.back() == 1.0);
  double total = 0.0, x30 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    CHECK(rule.weights[i] > 0.0);
    CHECK(rule.nodes[i] == doctest::Approx(-rule.nodes[16 - i]).epsilon(1e-15));
    total += rule.weights[i];
    x30 += rule.weights[i] * std::pow(rule.nodes[i], 30);
  }
  CHECK(total == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(x30 == doctest::Approx(2.0 / 31.0).epsilon(1e-12));  // degree 2n-3 = 31 is still exact
}

TEST_CASE("Legendre derivative agrees with direct differentiation and finite differences") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::vector<double> c(25);
  for (auto& v : c) v = nd(rng) / (1.0 + 0.1 * (&v - c.data()));
  const auto dc = legendre::derivative(c);
  for (double x : {-1.0, -0.73, 0.0, 0.41, 1.0}) {
    double val = 0.0, der = 0.0;
    legendre::eval_with_derivative(c, x, val, der);
    CHECK(legendre::eval(c, x) == doctest::Approx(val).epsilon(1e-13));
    CHECK(legendre::eval(dc, x) == doctest::Approx(der).epsilon(1e-11));
  }
  const double h = 1e-5, x = 0.3;
  const double fd = (legendre::eval(c, x + h) - legendre::eval(c, x - h)) / (2 * h);
  CHECK(legendre::eval(dc, x) == doctest::Approx(fd).epsilon(1e-7));
  // antiderivative inverts derivative and vanishes at -1
  const auto ac = legendre::antiderivative(c);
  CHECK(std::abs(legendre::eval(ac, -1.0)) < 1e-13);
  const auto back = legendre::derivative(ac);
  for (std::size_t k = 0; k < c.size(); ++k) CHECK(back[k] == doctest::Approx(c[k]).epsilon(1e-12));
}

TEST_CASE("log moments match a graded-quadrature oracle") {
  // substitute 1 + x = 2 t^6 so the log singularity becomes t^5 log t
  const auto gl = quad::mapped(quad::gauss_legendre(400), 0.0, 1.0);
  for (int k = 0; k <= 8; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double t = gl.nodes[i];
      const double x = -1.0 + 2.0 * std::pow(t, 6);
      sum += gl.weights[i] * 12.0 * std::pow(t, 5) * 6.0 * std::log(t) * legendre::values(k, x)[k];
    }
    CHECK(legendre::log_moment(k) == doctest::Approx(sum).epsilon(1e-10));
  }
}

TEST_CASE("Grid transforms round-trip and the round Laplacian is diagonal") {
  const Grid g(33);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(33);
  c(2) = 1.0;
  c(7) = -0.5;
  const Eigen::VectorXd nodal = g.to_nodal(c);
  CHECK((g.to_modal(nodal) - c).cwiseAbs().maxCoeff() < 1e-13);
  const Eigen::VectorXd lap = g.to_modal(g.round_laplacian(nodal));
  CHECK(lap(2) == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(lap(7) == doctest::Approx(0.5 * 28.0).epsilon(1e-12));
}
