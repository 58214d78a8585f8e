#pragma once

// Run configuration, snapshot files, CSV tables, JSON reports and SVG plots.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "krflab/bergman.hpp"
#include "krflab/entropy.hpp"
#include "krflab/flow.hpp"
#include "krflab/verify.hpp"

namespace krf {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct RunConfig {
  int modes = 64;
  StepController ctrl;
  double t_end = 1.0;
  std::vector<double> snapshot_times;  // empty: dyadic times and 3/4
  std::map<int, double> initial;       // Legendre coefficients of f, k >= 2

  int ensemble_count = 20;
  double r0 = 0.5;
  std::uint64_t seed = 1;
  double roughness = 0.3;
  double ensemble_horizon = 1.0;

  std::vector<int> levels{1, 2, 3, 4};
  int level_cap = 16;

  std::set<std::string> checks_enabled;  // empty: every check
  bool checks_refine = true;
  bool checks_ensemble = false;
  double slack_abs = 1e-6;
  double conservation_tol = 1e-7;
  double stability_tol = 0.25;

  std::string out_dir = "out";
  std::set<std::string> formats{"csv", "json", "svg", "snap"};

  /// Throws ConfigError naming the offending key.
  void validate() const;
  VerifyOptions verify_options() const;
  EnsembleSpec ensemble_spec() const;
  MetricState initial_state() const;
  std::vector<double> effective_snapshot_times() const;
};

/// Parse `key = value` lines; `#` starts a comment. Unknown or repeated keys and bad
/// values throw ConfigError prefixed with source:line.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Canonical `key = value` text of every field, keys sorted.
std::string canonical_text(const RunConfig& cfg);
std::uint64_t fnv1a(const std::string& bytes);
/// FNV-1a of the canonical text without the output.* keys, which do not change results.
std::uint64_t config_hash_value(const RunConfig& cfg);
/// config_hash_value as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Shortest decimal that reads back to the same double; nan and inf spelled out.
std::string format_double(double v);

struct SnapshotFile {
  std::uint32_t version = kSnapshotVersion;
  double t = 0.0;
  std::uint64_t config_hash = 0;
  Eigen::VectorXd modal;
};

std::string encode_snapshot(const SnapshotFile& snap);
/// Throws VersionMismatch on a bad magic or version, IoError on truncation.
SnapshotFile decode_snapshot(const std::string& bytes);
void save_snapshot(const std::string& path, const SnapshotFile& snap);
SnapshotFile load_snapshot(const std::string& path);

std::string read_file(const std::string& path);
/// Creates parent directories; throws IoError on failure.
void write_file(const std::string& path, const std::string& contents);

/// Columns t, R_min, R_max, sup_grad_u_sq, vol, a, c_s, c_s_residual, W; one row per snapshot.
std::string diagnostics_csv(const FlowTrajectory& traj);
/// Columns x, l, rho, eta per node and level, then one `integral` row per level holding int rho dmu.
std::string bergman_csv(const MetricState& state, const std::vector<int>& levels);
std::string green_csv(const MetricState& state);
std::string entropy_csv(const std::vector<EntropyRecord>& series);
std::string ensemble_csv(const EnsembleTable& table);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // non-numeric cells read as nan
  std::vector<double> column(const std::string& name) const;
};
CsvTable parse_csv(const std::string& text);

struct ReportExtras {
  std::optional<BlowupFit> blowup_r;
  std::optional<BlowupFit> blowup_grad_u;
  const EnsembleTable* ensemble = nullptr;
};
/// Pretty-printed JSON with sorted keys; non-finite numbers become null.
std::string report_json(const VerificationReport& rep, const ReportExtras& extras = {});

struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
  bool dashed = false;
};

struct SvgPlot {
  std::string title, xlabel, ylabel;
  bool logx = false, logy = false;
  std::vector<SvgSeries> series;

  std::string render(int width = 640, int height = 420) const;
};

}  // namespace krf
