#pragma once

// Bergman kernels of K^{-l} = O(2l) on CP^1 for S^1-invariant metrics.
//
// Monomial sections z^j, j = 0..2l, have pointwise norm e^{js - l v}; in x this is
//   E_j(x) = (1+x)^j (1-x)^{2l-j} e^{-l f(x)} / 4^l,
// and the L^2 norms G_j = 2 pi int E_j w dx are Gauss-Jacobi integrals with
// weight (1-x)^{2l-j} (1+x)^j. Invariance makes the Gram matrix diagonal.

#include <utility>
#include <vector>

#include "krflab/geometry.hpp"

namespace krf {

/// Pointwise Hermitian metric on O(2l), up to a constant factor.
enum class HermitianChoice {
  Potential,   // e^{-l v}
  VolumeForm,  // (omega e^{h})^l
};

struct BergmanOptions {
  int max_level = 16;
  double quad_tol = 1e-11;  // relative disagreement allowed between the n and n + 16 point rules
};

struct SectionGram {
  int level = 0;
  int count = 0;  // N = 2l + 1
  std::vector<double> g;  // G_j
  int quad_points = 0;
  double quad_error = 0.0;  // max relative change against the refined rule
};

struct BergmanField {
  int level = 0;
  ScalarField rho;
  ScalarField eta;
  double trace = 0.0;  // int rho dmu by the grid quadrature
};

SectionGram gram_diagonal(const MetricState& state, int l, HermitianChoice choice = HermitianChoice::Potential,
                          const BergmanOptions& opts = {});
/// Gram data for the weight (1+x)^j (1-x)^{2l-j} exp(L(x)) / 4^l with L given by Legendre coefficients.
SectionGram gram_with_log_weight(const MetricState& state, int l, const Eigen::VectorXd& log_weight_modal,
                                 const BergmanOptions& opts = {});

BergmanField bergman_kernel(const MetricState& state, int l, HermitianChoice choice = HermitianChoice::Potential,
                            const BergmanOptions& opts = {});
BergmanField bergman_kernel_with_log_weight(const MetricState& state, int l, const Eigen::VectorXd& log_weight_modal,
                                            const BergmanOptions& opts = {});

/// sup of |S(x)|^2 over unit-norm sections, by explicit rank-one maximization.
ScalarField eta(const MetricState& state, int l, const BergmanOptions& opts = {});
/// |S(x)|^2 for the section sum_j a_j z^j (real coefficients, theta = 0), a normalized in L^2.
ScalarField section_norm(const MetricState& state, int l, const std::vector<double>& a, const BergmanOptions& opts = {});

/// Kernel through the full Gram matrix of a randomly unitarily mixed monomial basis,
/// computed by (x, theta) quadrature and Cholesky orthonormalization.
ScalarField bergman_kernel_dense(const MetricState& state, int l, unsigned long long seed,
                                 const BergmanOptions& opts = {});

/// (min, max) over the grid of rho_a / rho_b.
std::pair<double, double> kernel_ratio(const MetricState& a, const MetricState& b, int l,
                                       const BergmanOptions& opts = {});

struct SectionIdentity {
  double sup_residual = 0.0;  // sup |Delta |S|^2 - |grad S|^2 + l |S|^2|
  double integrated = 0.0;    // |int |grad S|^2 dmu - l int |S|^2 dmu|
};
SectionIdentity section_identity_residual(const MetricState& state, int l, int j);

/// |grad z^j|^2 and |z^j|^2 at the nodes (weight e^{-l v}).
std::pair<Eigen::VectorXd, Eigen::VectorXd> section_gradient_norm(const MetricState& state, int l, int j);

}  // namespace krf
