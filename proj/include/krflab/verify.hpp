#pragma once

// Check suite over flow trajectories, blow-up exponent fits and ensemble scans.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "krflab/flow.hpp"
#include "krflab/profile.hpp"

namespace krf {

struct Check {
  std::string name;
  std::string anchor;  // statement being checked
  double value = 0.0;  // primary fitted constant or extremal value
  std::map<std::string, double> values;
  double bound = 0.0;
  bool has_bound = false;
  bool applicable = true;
  bool pass = false;
  std::string error;
  double stability = 0.0;  // relative change under refinement, when a refined run exists
  bool refined = false;
  bool stable = true;
};

struct RunMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
  int modes = 0;
  double dt_init = 0.0;
  double dt_max = 0.0;
  double tol = 0.0;
  double t_end = 0.0;
};

struct VerificationReport {
  RunMeta meta;
  std::vector<Check> checks;  // sorted by name

  bool all_pass() const;
  const Check* find(const std::string& name) const;
};

struct VerifyOptions {
  int n0 = 3;
  double slack_abs = 1e-6;
  double conservation_tol = 1e-7;
  double stability_tol = 0.25;
  std::set<std::string> enabled;  // empty: every check
};

/// Names of all checks run_checks knows, sorted.
std::vector<std::string> check_names();

/// Dyadic times 2^-k (k = 0..10) together with 1/2 and 3/4; the snapshot set run_checks expects.
std::vector<double> verification_times();

/// Run every enabled check on a trajectory covering [0, 1]. Check failures are recorded, never thrown.
VerificationReport run_checks(const FlowTrajectory& traj, const VerifyOptions& opts = {});

/// Zero-pad Legendre coefficients to a finer grid.
Eigen::VectorXd refine_modal(const Eigen::VectorXd& modal, int modes);

/// Run the base trajectory and one with doubled modes and halved steps, and attach
/// refinement stability to every check of the base report.
VerificationReport run_checks_refined(const MetricState& initial, const StepController& ctrl,
                                      const VerifyOptions& opts = {});
/// Same, reusing a base trajectory computed with `ctrl` on verification_times().
VerificationReport run_checks_refined(const FlowTrajectory& base, const StepController& ctrl,
                                      const VerifyOptions& opts = {});

struct BlowupFit {
  double alpha = 0.0;  // Q ~ C t^{-alpha}
  double c = 0.0;      // max_t Q(t) t^{alpha}
  int samples = 0;
};

/// Least-squares slope of log Q against -log t. Throws InsufficientSamples below 4 points.
BlowupFit fit_blowup(const std::vector<double>& t, const std::vector<double>& q);

struct MemberBlowup {
  BlowupFit r;
  BlowupFit grad_u;
};

/// Fits over the snapshots of each trajectory stored at t = 2^-k.
std::vector<MemberBlowup> blowup_exponent(const std::vector<const FlowTrajectory*>& trajs);

struct EnsembleSpec {
  int count = 20;
  double r0 = 0.5;
  double roughness = 0.3;  // in [0, 1]: higher means more and stronger high-frequency modes
  std::uint64_t seed = 1;
  std::vector<int> levels{1, 2, 3, 4};
  double horizon = 1.0;
  int modes = 64;
  StepController ctrl;
  int threads = 0;  // 0: hardware concurrency
  bool round_members = false;  // degenerate ensemble of round spheres

  void validate() const;
};

/// Random curvature profile with K >= r0: 1 + sum_{k >= 2} a_k P_k, rescaled so the dip stays above r0.
CurvatureProfile sample_profile(std::mt19937_64& rng, double r0, double roughness);

struct EnsembleMember {
  int index = 0;
  std::string error;  // empty on success
  std::vector<double> profile;
  FlowTrajectory traj;
  double min_curvature = 0.0;  // over all accepted steps
};

/// Generate and flow every member; failures are recorded per member.
std::vector<EnsembleMember> run_ensemble(const EnsembleSpec& spec);

struct EnsembleRow {
  int member = 0;
  int level = 0;
  double inf_rho0 = 0.0;
  double inf_rho_half = 0.0;
  double inf_rho1 = 0.0;
  double ratio_min = 0.0;  // min over s in {1/2, 1} and x of rho_s / rho_0
  double ratio_max = 0.0;
  double sup_log_hermitian = 0.0;  // sup |c_s - f_s| over s in {1/2, 1}
};

struct EnsembleSummary {
  int level = 0;
  double min_inf_rho0 = 0.0;
  double min_inf_rho1 = 0.0;
  int members = 0;
};

struct EnsembleTable {
  std::vector<EnsembleRow> rows;
  std::vector<EnsembleSummary> summary;
  std::vector<std::pair<int, std::string>> failures;
  bool curvature_sign_preserved = true;  // members with K >= 0 keep min K >= -1e-6
};

EnsembleTable ensemble_scan(const EnsembleSpec& spec);
EnsembleTable ensemble_scan(const EnsembleSpec& spec, const std::vector<EnsembleMember>& members);

/// Run fn(i) for i in [0, n) on up to `threads` workers (0: hardware concurrency).
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace krf
