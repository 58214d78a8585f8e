#pragma once

// Heat equation dF/dt = Delta_{g(t)} F + a F along a stored flow trajectory, and the
// Moser-type ratio sup_x F(x, t) t^{(n0+2)/(2p)} / (int_0^1 int F^p dmu dt)^{1/p}.

#include <vector>

#include "krflab/flow.hpp"

namespace krf {

struct HeatRun {
  GridPtr grid;
  double a = 0.0;
  double p = 2.0;
  std::vector<double> times;                // stored times, ascending, starting at 0
  std::vector<Eigen::VectorXd> fields;      // nodal F at each stored time
  std::vector<double> accumulated;          // int_0^t int F^p dmu dt at each stored time
  std::vector<double> mass;                 // int F dmu(t) at each stored time
  ode::Stats stats;

  double spacetime_lp() const { return accumulated.empty() ? 0.0 : accumulated.back(); }
};

/// Solve on [0, t_end] (t_end <= traj end). Stored times default to the dyadic times 2^-k and t_end.
/// Throws NegativityDetected if F0 < 0 or the solution turns negative, RangeError if a < 0,
/// p <= 0 or the trajectory is too short.
HeatRun evolve_heat(const FlowTrajectory& traj, const ScalarField& f0, double a, double p,
                    const StepController& ctrl = {}, std::vector<double> store_times = {}, double t_end = 1.0);

/// max over stored t > 0 of sup F(t) t^{(n0+2)/(2p)} / (int_0^1 int F^p)^{1/p}.
/// Throws ZeroDenominator if the space-time integral vanishes.
double moser_ratio(const HeatRun& run, int n0 = 3);

}  // namespace krf
