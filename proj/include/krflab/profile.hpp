#pragma once

#include <functional>
#include <vector>

#include "krflab/geometry.hpp"

namespace krf {

struct ProfileOptions {
  bool project = true;       // enforce the closure constraints by orthogonal projection
  int clip_passes = 2;       // clip-to-R0 / re-project rounds before giving up
  double closure_tol = 1e-10;
};

/// Prescribed Gaussian curvature K(tau) on the moment interval [-1, 1],
/// stored as Legendre coefficients in tau.
///
/// Integrating phi'' = -K from the south pole with phi(-1) = 0, phi'(-1) = 1
/// closes up smoothly at the north pole iff int K = 2 and int (1 - tau) K = 2,
/// i.e. iff the P_0 coefficient is 1 and the P_1 coefficient is 0.
class CurvatureProfile {
 public:
  /// Samples at the `samples.size()` Gauss-Lobatto points in tau.
  static CurvatureProfile from_samples(const std::vector<double>& samples, double lower_bound,
                                       const ProfileOptions& opts = {});
  static CurvatureProfile from_function(const std::function<double(double)>& k, int points, double lower_bound,
                                        const ProfileOptions& opts = {});
  static CurvatureProfile from_coefficients(std::vector<double> coeffs, double lower_bound,
                                            const ProfileOptions& opts = {});

  double operator()(double tau) const;
  const std::vector<double>& coefficients() const noexcept { return coeffs_; }
  double lower_bound() const noexcept { return lower_bound_; }
  /// Minimum over a dense sampling of [-1, 1].
  double sampled_min() const;
  /// |int K - 2| + |int (1 - tau) K - 2|.
  double closure_residual() const;

 private:
  CurvatureProfile() = default;
  static CurvatureProfile finish(std::vector<double> coeffs, double lower_bound, const ProfileOptions& opts);

  std::vector<double> coeffs_;
  double lower_bound_ = 0.0;
};

/// Metric whose Gaussian curvature, pulled back by the moment map, is K.
/// The s-translation gauge puts tau = 0 at s = 0 and the additive gauge sets f(x = 0) = 0.
MetricState state_from_curvature_profile(const CurvatureProfile& profile, GridPtr grid, const Tolerances& tol = {});

/// max_i |R(x_i) - K(tau(x_i))|.
double profile_round_trip_error(const CurvatureProfile& profile, const MetricState& state);

}  // namespace krf
