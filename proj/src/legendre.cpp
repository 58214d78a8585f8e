#include "krflab/legendre.hpp"

#include <cmath>

namespace krf::legendre {

std::vector<double> values(int n, double x) {
  std::vector<double> p(static_cast<std::size_t>(n) + 1);
  p[0] = 1.0;
  if (n >= 1) p[1] = x;
  for (int k = 1; k < n; ++k) {
    p[k + 1] = ((2.0 * k + 1.0) * x * p[k] - k * p[k - 1]) / (k + 1.0);
  }
  return p;
}

double eval(std::span<const double> c, double x) {
  // Clenshaw with alpha_k = (2k+1)x/(k+1), beta_k = -k/(k+1)
  const int n = static_cast<int>(c.size()) - 1;
  if (n < 0) return 0.0;
  double b1 = 0.0, b2 = 0.0;
  for (int k = n; k >= 1; --k) {
    const double alpha = (2.0 * k + 1.0) * x / (k + 1.0);
    const double beta = -(k + 1.0) / (k + 2.0);
    const double b0 = c[k] + alpha * b1 + beta * b2;
    b2 = b1;
    b1 = b0;
  }
  return c[0] + x * b1 - 0.5 * b2;
}

void eval_with_derivative(std::span<const double> c, double x, double& value, double& deriv) {
  const int n = static_cast<int>(c.size()) - 1;
  value = 0.0;
  deriv = 0.0;
  if (n < 0) return;
  double p0 = 1.0, p1 = x;
  double d0 = 0.0, d1 = 1.0;
  value = c[0];
  if (n >= 1) {
    value += c[1] * p1;
    deriv += c[1] * d1;
  }
  for (int k = 1; k < n; ++k) {
    const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
    const double d2 = d0 + (2.0 * k + 1.0) * p1;
    value += c[k + 1] * p2;
    deriv += c[k + 1] * d2;
    p0 = p1;
    p1 = p2;
    d0 = d1;
    d1 = d2;
  }
}

std::vector<double> derivative(std::span<const double> a) {
  const int n = static_cast<int>(a.size()) - 1;
  std::vector<double> b(a.size(), 0.0);
  if (n < 1) return b;
  // scaled[j] = b_j/(2j+1); b_{k-1}/(2k-1) = a_k + b_{k+1}/(2k+3)
  std::vector<double> scaled(static_cast<std::size_t>(n) + 2, 0.0);
  for (int k = n; k >= 1; --k) {
    const double next = (k + 1 <= n) ? scaled[k + 1] : 0.0;
    scaled[k - 1] = a[k] + next;
    b[k - 1] = (2.0 * k - 1.0) * scaled[k - 1];
  }
  return b;
}

std::vector<double> antiderivative(std::span<const double> a) {
  const int n = static_cast<int>(a.size()) - 1;
  std::vector<double> c(a.size() + 1, 0.0);
  // int P_k = (P_{k+1} - P_{k-1})/(2k+1) for k >= 1, int P_0 = P_1
  for (int k = 0; k <= n; ++k) {
    if (k == 0) {
      c[1] += a[0];
    } else {
      c[k + 1] += a[k] / (2.0 * k + 1.0);
      c[k - 1] -= a[k] / (2.0 * k + 1.0);
    }
  }
  // enforce value zero at x = -1
  double at_minus_one = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) at_minus_one += (k % 2 == 0 ? 1.0 : -1.0) * c[k];
  c[0] -= at_minus_one;
  return c;
}

std::vector<double> round_laplacian(std::span<const double> a) {
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double kk = static_cast<double>(k);
    out[k] = -0.5 * kk * (kk + 1.0) * a[k];
  }
  return out;
}

double log_moment(int k) {
  if (k == 0) return -2.0;
  const double sign = (k % 2 == 1) ? 1.0 : -1.0;
  return sign * 2.0 / (static_cast<double>(k) * (k + 1.0));
}

}  // namespace krf::legendre
