#include "krflab/bergman.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <tuple>

#include "krflab/error.hpp"
#include "krflab/legendre.hpp"
#include "krflab/quadrature.hpp"

namespace krf {
namespace {

const quad::Rule& jacobi_rule(int n, int alpha, int beta) {
  static thread_local std::map<std::tuple<int, int, int>, quad::Rule> cache;
  const auto key = std::make_tuple(n, alpha, beta);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, quad::gauss_jacobi(n, alpha, beta)).first;
  return it->second;
}

void check_level(int l, const BergmanOptions& opts) {
  if (l < 1 || l > opts.max_level) {
    throw Error(ErrorCode::RangeError, "level " + std::to_string(l) + " outside [1, " +
                                           std::to_string(opts.max_level) + "]");
  }
}

Eigen::VectorXd log_weight_for(const MetricState& st, int l, HermitianChoice choice) {
  if (choice == HermitianChoice::Potential) return -l * st.f_modal();
  return st.grid()->to_modal(l * (st.log_w() + st.h()));
}

// 2 pi / 4^l int (1+x)^j (1-x)^{2l-j} e^{L} w dx with an n-point rule
double gram_entry(const Eigen::VectorXd& lw, const Eigen::VectorXd& wm, int l, int j, int n) {
  const quad::Rule& r = jacobi_rule(n, 2 * l - j, j);
  std::span<const double> lc(lw.data(), lw.size()), wc(wm.data(), wm.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const double x = r.nodes[i];
    sum += r.weights[i] * std::exp(legendre::eval(lc, x)) * legendre::eval(wc, x);
  }
  return kTwoPi * sum / std::pow(4.0, l);
}

// E_j(x_i) = (1+x)^j (1-x)^{2l-j} e^{L} / 4^l at the grid nodes
Eigen::MatrixXd section_norms(const MetricState& st, int l, const Eigen::VectorXd& log_weight_modal) {
  const Grid& g = *st.grid();
  const Eigen::VectorXd lw = g.to_nodal(log_weight_modal);
  Eigen::MatrixXd e(g.modes(), 2 * l + 1);
  for (int i = 0; i < g.modes(); ++i) {
    const double x = g.nodes()[i];
    const double base = std::exp(lw(i)) / std::pow(4.0, l);
    for (int j = 0; j <= 2 * l; ++j) e(i, j) = std::pow(1.0 + x, j) * std::pow(1.0 - x, 2 * l - j) * base;
  }
  return e;
}

}  // namespace

SectionGram gram_with_log_weight(const MetricState& st, int l, const Eigen::VectorXd& log_weight_modal,
                                 const BergmanOptions& opts) {
  check_level(l, opts);
  if (log_weight_modal.size() != st.grid()->modes()) throw Error(ErrorCode::GridMismatch, "weight length");
  const Eigen::VectorXd wm = st.w_modal();
  SectionGram out;
  out.level = l;
  out.count = 2 * l + 1;
  out.quad_points = st.grid()->modes() + 2 * l + 16;
  out.g.resize(out.count);
  for (int j = 0; j < out.count; ++j) {
    const double coarse = gram_entry(log_weight_modal, wm, l, j, out.quad_points);
    const double fine = gram_entry(log_weight_modal, wm, l, j, out.quad_points + 16);
    const double rel = std::abs(fine - coarse) / std::abs(fine);
    out.quad_error = std::max(out.quad_error, rel);
    if (!(fine > 0.0) || !(rel <= opts.quad_tol)) {
      throw Error(ErrorCode::QuadratureFailure, "section norm " + std::to_string(j) + " unresolved, rel. change " +
                                                    std::to_string(rel));
    }
    out.g[j] = fine;
  }
  return out;
}

SectionGram gram_diagonal(const MetricState& st, int l, HermitianChoice choice, const BergmanOptions& opts) {
  check_level(l, opts);
  return gram_with_log_weight(st, l, log_weight_for(st, l, choice), opts);
}

BergmanField bergman_kernel_with_log_weight(const MetricState& st, int l, const Eigen::VectorXd& log_weight_modal,
                                            const BergmanOptions& opts) {
  const SectionGram gram = gram_with_log_weight(st, l, log_weight_modal, opts);
  const Eigen::MatrixXd e = section_norms(st, l, log_weight_modal);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(e.rows());
  for (int j = 0; j < gram.count; ++j) rho += e.col(j) / gram.g[j];

  // eta: maximize |sum a_j e_j(x)|^2 over unit a, e_j = z^j / sqrt(G_j); the fibre is a line,
  // so the maximizer is a = conj(b) / |b| with b_j the fibre coordinates of e_j.
  Eigen::VectorXd eta(e.rows());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    Eigen::VectorXd b(gram.count);
    for (int j = 0; j < gram.count; ++j) b(j) = std::sqrt(e(i, j) / gram.g[j]);
    const double nb = b.norm();
    if (nb == 0.0) {
      eta(i) = 0.0;
      continue;
    }
    const Eigen::VectorXd a = b / nb;
    const double val = a.dot(b);
    eta(i) = val * val;
  }

  BergmanField out;
  out.level = l;
  out.trace = integrate(st, rho);
  out.rho = ScalarField(st.grid(), std::move(rho));
  out.eta = ScalarField(st.grid(), std::move(eta));
  return out;
}

BergmanField bergman_kernel(const MetricState& st, int l, HermitianChoice choice, const BergmanOptions& opts) {
  check_level(l, opts);
  return bergman_kernel_with_log_weight(st, l, log_weight_for(st, l, choice), opts);
}

ScalarField eta(const MetricState& st, int l, const BergmanOptions& opts) {
  return bergman_kernel(st, l, HermitianChoice::Potential, opts).eta;
}

ScalarField section_norm(const MetricState& st, int l, const std::vector<double>& a, const BergmanOptions& opts) {
  check_level(l, opts);
  if (static_cast<int>(a.size()) != 2 * l + 1) throw Error(ErrorCode::RangeError, "need 2l + 1 coefficients");
  const Eigen::VectorXd lw = log_weight_for(st, l, HermitianChoice::Potential);
  const SectionGram gram = gram_with_log_weight(st, l, lw, opts);
  double norm2 = 0.0;
  for (int j = 0; j <= 2 * l; ++j) norm2 += a[j] * a[j] * gram.g[j];
  if (!(norm2 > 0.0)) throw Error(ErrorCode::ZeroDenominator, "zero section");
  const Eigen::MatrixXd e = section_norms(st, l, lw);
  Eigen::VectorXd out(e.rows());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j <= 2 * l; ++j) s += a[j] * std::sqrt(e(i, j));
    out(i) = s * s / norm2;
  }
  return {st.grid(), std::move(out)};
}

ScalarField bergman_kernel_dense(const MetricState& st, int l, unsigned long long seed, const BergmanOptions& opts) {
  check_level(l, opts);
  using Complex = std::complex<double>;
  const int n = 2 * l + 1;
  const Grid& g = *st.grid();
  const Eigen::VectorXd lw = -l * st.f_modal();
  const Eigen::VectorXd wm = st.w_modal();
  std::span<const double> lc(lw.data(), lw.size()), wc(wm.data(), wm.size());

  // full Gram matrix of the monomials by Gauss-Legendre in x and the trapezoid rule in theta
  const quad::Rule gl = quad::gauss_legendre(g.modes() + 2 * l + 48);
  const int m_theta = 4 * l + 4;
  Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
    const double x = gl.nodes[q];
    const double radial = gl.weights[q] * std::exp(legendre::eval(lc, x)) * legendre::eval(wc, x) / std::pow(4.0, l);
    for (int t = 0; t < m_theta; ++t) {
      const double theta = kTwoPi * t / m_theta;
      Eigen::VectorXcd z(n);
      for (int j = 0; j < n; ++j) {
        // z^j e^{-l v0 / 2} split symmetrically: |z|^j = ((1+x)/(1-x))^{j/2}
        z(j) = std::polar(std::pow(1.0 + x, 0.5 * j) * std::pow(1.0 - x, l - 0.5 * j), j * theta);
      }
      gram += (radial * kTwoPi / m_theta) * (z * z.adjoint());
    }
  }

  // random unitary mixing: Q factor of a complex Gaussian matrix
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = Complex(nd(rng), nd(rng));
  }
  const Eigen::MatrixXcd u = Eigen::HouseholderQR<Eigen::MatrixXcd>(a).householderQ();
  const Eigen::MatrixXcd mixed = u * gram * u.adjoint();
  const Eigen::LLT<Eigen::MatrixXcd> llt(mixed);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SolveFailure, "Gram matrix is not positive definite");

  const Eigen::VectorXd lw_nodal = g.to_nodal(lw);
  Eigen::VectorXd rho(g.modes());
  for (int i = 0; i < g.modes(); ++i) {
    const double x = g.nodes()[i];
    Eigen::VectorXcd s(n);
    for (int j = 0; j < n; ++j) {
      s(j) = std::pow(1.0 + x, 0.5 * j) * std::pow(1.0 - x, l - 0.5 * j) * std::exp(0.5 * lw_nodal(i)) /
             std::pow(2.0, l);
    }
    // fibre values of the mixed basis T_a = sum_j u_{aj} z^j
    const Eigen::VectorXcd t = u * s;
    rho(i) = llt.matrixL().solve(t).squaredNorm();
  }
  return {st.grid(), std::move(rho)};
}

std::pair<double, double> kernel_ratio(const MetricState& a, const MetricState& b, int l, const BergmanOptions& opts) {
  require_same_grid(a.grid(), b.grid());
  const BergmanField ka = bergman_kernel(a, l, HermitianChoice::Potential, opts);
  const BergmanField kb = bergman_kernel(b, l, HermitianChoice::Potential, opts);
  const Eigen::ArrayXd r = ka.rho.values().array() / kb.rho.values().array();
  return {r.minCoeff(), r.maxCoeff()};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> section_gradient_norm(const MetricState& st, int l, int j) {
  if (l < 1 || j < 0 || j > 2 * l) throw Error(ErrorCode::RangeError, "section index out of range");
  const Grid& g = *st.grid();
  const int n = g.modes();
  Eigen::VectorXd norm(n), grad(n);
  for (int i = 0; i < n; ++i) {
    const double x = g.nodes()[i];
    const double fx = st.f_x()(i);
    const double w = st.w()(i);
    const double ef = std::exp(-l * st.f()(i)) / std::pow(4.0, l);
    norm(i) = std::pow(1.0 + x, j) * std::pow(1.0 - x, 2 * l - j) * ef;
    // |grad z^j|^2 = E_j (j - l v')^2 / v'' with v'' = (1 - x^2) w / 2,
    // v' = (1 + x) q and 2 - v' = (1 - x) p keep the pole limits finite.
    const double q = 1.0 + 0.5 * (1.0 - x) * fx;
    const double p = 1.0 - 0.5 * (1.0 + x) * fx;
    if (j == 0) {
      grad(i) = 2.0 * l * l * q * q * (1.0 + x) * std::pow(1.0 - x, 2 * l - 1) * ef / w;
    } else if (j == 2 * l) {
      grad(i) = 2.0 * l * l * p * p * (1.0 - x) * std::pow(1.0 + x, 2 * l - 1) * ef / w;
    } else {
      const double vp = (1.0 + x) * q;
      const double d = j - l * vp;
      grad(i) = 2.0 * d * d * std::pow(1.0 + x, j - 1) * std::pow(1.0 - x, 2 * l - j - 1) * ef / w;
    }
  }
  return {grad, norm};
}

SectionIdentity section_identity_residual(const MetricState& st, int l, int j) {
  const auto [grad, norm] = section_gradient_norm(st, l, j);
  const Eigen::VectorXd lap = st.grid()->round_laplacian(norm).cwiseQuotient(st.w());
  SectionIdentity out;
  out.sup_residual = (lap - grad + l * norm).cwiseAbs().maxCoeff();
  out.integrated = std::abs(integrate(st, grad) - l * integrate(st, norm));
  return out;
}

}  // namespace krf
