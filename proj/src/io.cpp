#include "krflab/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "krflab/error.hpp"
#include "krflab/green.hpp"

namespace krf {
namespace {

static_assert(std::endian::native == std::endian::little, "snapshot files are little-endian");

constexpr char kMagic[8] = {'K', 'R', 'F', 'L', 'A', 'B', '1', '\0'};
constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8 + 8;

const std::set<std::string> kFormats{"csv", "json", "svg", "snap"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, key + ": " + msg);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) bad(key, "expected a number, got '" + s + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& s) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(key, "expected an integer, got '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(key, "expected an unsigned integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  bad(key, "expected true or false, got '" + s + "'");
}

std::string join(const std::vector<std::string>& parts, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

Field number(double RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); },
          [m](const RunConfig& c) { return format_double(c.*m); }};
}

Field ctrl_number(double StepController::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.ctrl.*m = parse_double(k, v); },
          [m](const RunConfig& c) { return format_double(c.ctrl.*m); }};
}

Field integer(int RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) {
            const long long x = parse_int(k, v);
            if (x < -1000000000LL || x > 1000000000LL) bad(k, "out of range");
            c.*m = static_cast<int>(x);
          },
          [m](const RunConfig& c) { return std::to_string(c.*m); }};
}

Field boolean(bool RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); },
          [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

Field name_set(std::set<std::string> RunConfig::*m) {
  return {[m](RunConfig& c, const std::string&, const std::string& v) {
            const auto parts = split_list(v);
            c.*m = std::set<std::string>(parts.begin(), parts.end());
          },
          [m](const RunConfig& c) { return join(std::vector<std::string>((c.*m).begin(), (c.*m).end())); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f{
      {"grid.modes", integer(&RunConfig::modes)},
      {"flow.dt_init", ctrl_number(&StepController::dt_init)},
      {"flow.dt_min", ctrl_number(&StepController::dt_min)},
      {"flow.dt_max", ctrl_number(&StepController::dt_max)},
      {"flow.tol", ctrl_number(&StepController::tol)},
      {"flow.guard", ctrl_number(&StepController::guard)},
      {"flow.t_end", number(&RunConfig::t_end)},
      {"flow.snapshot_times",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.snapshot_times.clear();
          for (const auto& s : split_list(v)) c.snapshot_times.push_back(parse_double(k, s));
        },
        [](const RunConfig& c) {
          std::vector<std::string> p;
          for (double t : c.snapshot_times) p.push_back(format_double(t));
          return join(p);
        }}},
      {"initial.f",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.initial.clear();
          for (const auto& s : split_list(v)) {
            const auto colon = s.find(':');
            if (colon == std::string::npos) bad(k, "expected entries k:coefficient, got '" + s + "'");
            const long long mode = parse_int(k, s.substr(0, colon));
            if (mode < 2 || mode > 100000) bad(k, "mode index must be at least 2");
            if (!c.initial.emplace(static_cast<int>(mode), parse_double(k, s.substr(colon + 1))).second) {
              bad(k, "mode " + std::to_string(mode) + " given twice");
            }
          }
        },
        [](const RunConfig& c) {
          std::vector<std::string> p;
          for (const auto& [k, v] : c.initial) p.push_back(std::to_string(k) + ":" + format_double(v));
          return join(p);
        }}},
      {"ensemble.count", integer(&RunConfig::ensemble_count)},
      {"ensemble.R0", number(&RunConfig::r0)},
      {"ensemble.seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"ensemble.roughness", number(&RunConfig::roughness)},
      {"ensemble.horizon", number(&RunConfig::ensemble_horizon)},
      {"bergman.levels",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.levels.clear();
          for (const auto& s : split_list(v)) {
            const long long l = parse_int(k, s);
            if (l < 1 || l > 1000) bad(k, "levels must be positive");
            c.levels.push_back(static_cast<int>(l));
          }
        },
        [](const RunConfig& c) {
          std::vector<std::string> p;
          for (int l : c.levels) p.push_back(std::to_string(l));
          return join(p);
        }}},
      {"bergman.level_cap", integer(&RunConfig::level_cap)},
      {"checks.enabled", name_set(&RunConfig::checks_enabled)},
      {"checks.refine", boolean(&RunConfig::checks_refine)},
      {"checks.ensemble", boolean(&RunConfig::checks_ensemble)},
      {"checks.tolerances.slack_abs", number(&RunConfig::slack_abs)},
      {"checks.tolerances.conservation", number(&RunConfig::conservation_tol)},
      {"checks.tolerances.stability", number(&RunConfig::stability_tol)},
      {"output.dir",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
        [](const RunConfig& c) { return c.out_dir; }}},
      {"output.formats", name_set(&RunConfig::formats)},
  };
  return f;
}

void csv_row(std::string& out, const std::vector<std::string>& cells) {
  out += join(cells, ",");
  out += '\n';
}

std::string csv_head(const std::string& what, const std::vector<std::string>& columns) {
  std::string out = "# krflab " + what + " schema " + std::to_string(kCsvSchemaVersion) + "\n";
  csv_row(out, columns);
  return out;
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json fit_json(const BlowupFit& f) { return {{"alpha", num(f.alpha)}, {"c", num(f.c)}, {"samples", f.samples}}; }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  if (modes < 8 || modes > 1024) bad("grid.modes", "must lie in [8, 1024]");
  try {
    ctrl.validate();
  } catch (const Error& e) {
    bad("flow.dt_init", e.detail());
  }
  if (!(t_end > 0.0) || t_end > 100.0) bad("flow.t_end", "must lie in (0, 100]");
  for (double t : snapshot_times) {
    if (!(t > 0.0 && t <= t_end)) bad("flow.snapshot_times", "times must lie in (0, t_end]");
  }
  for (const auto& [k, v] : initial) {
    if (k >= modes) bad("initial.f", "mode " + std::to_string(k) + " exceeds grid.modes - 1");
  }
  if (ensemble_count < 1 || ensemble_count > 100000) bad("ensemble.count", "must lie in [1, 100000]");
  if (!(r0 > 0.0 && r0 < 1.0)) bad("ensemble.R0", "must lie in (0, 1)");
  if (!(roughness >= 0.0 && roughness <= 1.0)) bad("ensemble.roughness", "must lie in [0, 1]");
  if (!(ensemble_horizon > 0.0 && ensemble_horizon <= 100.0)) bad("ensemble.horizon", "must lie in (0, 100]");
  if (level_cap < 1 || level_cap > 64) bad("bergman.level_cap", "must lie in [1, 64]");
  if (levels.empty()) bad("bergman.levels", "must not be empty");
  for (int l : levels) {
    if (l > level_cap) bad("bergman.levels", "level " + std::to_string(l) + " exceeds bergman.level_cap");
  }
  const auto known = check_names();
  for (const auto& n : checks_enabled) {
    if (std::find(known.begin(), known.end(), n) == known.end()) bad("checks.enabled", "unknown check '" + n + "'");
  }
  if (!(slack_abs >= 0.0)) bad("checks.tolerances.slack_abs", "must be nonnegative");
  if (!(conservation_tol > 0.0)) bad("checks.tolerances.conservation", "must be positive");
  if (!(stability_tol > 0.0)) bad("checks.tolerances.stability", "must be positive");
  if (out_dir.empty()) bad("output.dir", "must not be empty");
  for (const auto& f : formats) {
    if (!kFormats.contains(f)) bad("output.formats", "unknown format '" + f + "'");
  }
}

VerifyOptions RunConfig::verify_options() const {
  VerifyOptions o;
  o.slack_abs = slack_abs;
  o.conservation_tol = conservation_tol;
  o.stability_tol = stability_tol;
  o.enabled = checks_enabled;
  return o;
}

EnsembleSpec RunConfig::ensemble_spec() const {
  EnsembleSpec s;
  s.count = ensemble_count;
  s.r0 = r0;
  s.roughness = roughness;
  s.seed = seed;
  s.levels = levels;
  s.horizon = ensemble_horizon;
  s.modes = modes;
  s.ctrl = ctrl;
  return s;
}

MetricState RunConfig::initial_state() const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(modes);
  for (const auto& [k, v] : initial) c(k) = v;
  return MetricState::from_modal(Grid::make(modes), c);
}

std::vector<double> RunConfig::effective_snapshot_times() const {
  std::vector<double> t = snapshot_times.empty() ? verification_times() : snapshot_times;
  std::erase_if(t, [&](double s) { return s > t_end; });
  if (std::find(t.begin(), t.end(), t_end) == t.end()) t.push_back(t_end);
  std::sort(t.begin(), t.end());
  return t;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw Error(ErrorCode::ConfigError, where + "unknown key '" + key + "'");
    if (seen.contains(key)) {
      throw Error(ErrorCode::ConfigError,
                  where + "key '" + key + "' already set on line " + std::to_string(seen[key]));
    }
    seen[key] = lineno;
    try {
      it->second.set(cfg, key, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, where + e.detail());
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    const std::string msg = e.detail();
    const auto key = msg.substr(0, msg.find(':'));
    auto it = seen.find(key);
    if (it == seen.end()) {
      const std::string section = key.substr(0, key.find('.') + 1);
      it = std::find_if(seen.begin(), seen.end(), [&](const auto& kv) { return kv.first.starts_with(section); });
    }
    const std::string where = it != seen.end() ? source + ":" + std::to_string(it->second) + ": " : source + ": ";
    throw Error(ErrorCode::ConfigError, where + msg);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.detail());
  }
  return parse_config(text, path);
}

std::string canonical_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(cfg) + "\n";
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash_value(const RunConfig& cfg) {
  std::string text;
  for (const auto& [k, f] : fields()) {
    if (!k.starts_with("output.")) text += k + " = " + f.get(cfg) + "\n";
  }
  return fnv1a(text);
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash_value(cfg)));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string encode_snapshot(const SnapshotFile& snap) {
  const auto modes = static_cast<std::uint32_t>(snap.modal.size());
  std::string out(kHeaderBytes + 8 * modes, '\0');
  char* p = out.data();
  std::memcpy(p, kMagic, 8);
  std::memcpy(p + 8, &snap.version, 4);
  std::memcpy(p + 12, &modes, 4);
  std::memcpy(p + 16, &snap.t, 8);
  std::memcpy(p + 24, &snap.config_hash, 8);
  if (modes > 0) std::memcpy(p + kHeaderBytes, snap.modal.data(), 8 * modes);
  return out;
}

SnapshotFile decode_snapshot(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw Error(ErrorCode::VersionMismatch, "not a KRFLAB1 snapshot (bad magic)");
  }
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::IoError, "snapshot header truncated");
  SnapshotFile s;
  std::uint32_t modes = 0;
  std::memcpy(&s.version, bytes.data() + 8, 4);
  if (s.version != kSnapshotVersion) {
    throw Error(ErrorCode::VersionMismatch, "snapshot format version " + std::to_string(s.version) +
                                                " (expected " + std::to_string(kSnapshotVersion) + ")");
  }
  std::memcpy(&modes, bytes.data() + 12, 4);
  std::memcpy(&s.t, bytes.data() + 16, 8);
  std::memcpy(&s.config_hash, bytes.data() + 24, 8);
  if (bytes.size() != kHeaderBytes + 8ULL * modes) throw Error(ErrorCode::IoError, "snapshot payload size mismatch");
  s.modal.resize(modes);
  if (modes > 0) std::memcpy(s.modal.data(), bytes.data() + kHeaderBytes, 8ULL * modes);
  return s;
}

void save_snapshot(const std::string& path, const SnapshotFile& snap) { write_file(path, encode_snapshot(snap)); }

SnapshotFile load_snapshot(const std::string& path) { return decode_snapshot(read_file(path)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path);
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + p.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

std::string diagnostics_csv(const FlowTrajectory& traj) {
  std::string out =
      csv_head("diagnostics", {"t", "R_min", "R_max", "sup_grad_u_sq", "vol", "a", "c_s", "c_s_residual", "W"});
  for (const auto& s : traj.snapshots) {
    const auto& d = s.diag;
    csv_row(out, {format_double(s.t), format_double(d.r_min), format_double(d.r_max), format_double(d.sup_grad_u_sq),
                  format_double(d.volume), format_double(d.a), format_double(d.c_s), format_double(d.c_s_residual),
                  format_double(d.w_value)});
  }
  return out;
}

std::string bergman_csv(const MetricState& state, const std::vector<int>& levels) {
  std::string out = csv_head("bergman", {"x", "l", "rho", "eta"});
  std::vector<std::pair<int, double>> traces;
  const auto& x = state.grid()->nodes();
  for (int l : levels) {
    const BergmanField bf = bergman_kernel(state, l);
    for (Eigen::Index i = 0; i < bf.rho.size(); ++i) {
      csv_row(out, {format_double(x[i]), std::to_string(l), format_double(bf.rho[i]), format_double(bf.eta[i])});
    }
    traces.emplace_back(l, bf.trace);
  }
  for (const auto& [l, tr] : traces) csv_row(out, {"integral", std::to_string(l), format_double(tr), ""});
  return out;
}

std::string green_csv(const MetricState& state) {
  const GreenProfile gp = green_profile(state);
  const Eigen::VectorXd d = meridian_distances_from(state, -1.0);
  const auto& x = state.grid()->nodes();
  std::string out = csv_head("green", {"x", "d", "abs_log_d", "gamma"});
  for (int i = 1; i < state.grid()->modes(); ++i) {
    csv_row(out, {format_double(x[i]), format_double(d(i)), format_double(std::abs(std::log(d(i)))),
                  format_double(gp(x[i]))});
  }
  return out;
}

std::string entropy_csv(const std::vector<EntropyRecord>& series) {
  std::string out = csv_head("entropy", {"t", "W", "constraint", "dWdt_fd", "dWdt_integrand"});
  for (const auto& r : series) {
    csv_row(out, {format_double(r.t), format_double(r.w), format_double(r.constraint), format_double(r.dwdt_fd),
                  format_double(r.dwdt_integrand)});
  }
  return out;
}

std::string ensemble_csv(const EnsembleTable& table) {
  std::string out = csv_head("ensemble", {"member", "level", "inf_rho0", "inf_rho_half", "inf_rho1", "ratio_min",
                                          "ratio_max", "sup_log_hermitian"});
  for (const auto& r : table.rows) {
    csv_row(out, {std::to_string(r.member), std::to_string(r.level), format_double(r.inf_rho0),
                  format_double(r.inf_rho_half), format_double(r.inf_rho1), format_double(r.ratio_min),
                  format_double(r.ratio_max), format_double(r.sup_log_hermitian)});
  }
  return out;
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::RangeError, "no column '" + name + "'");
  const auto j = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(j < r.size() ? r[j] : std::nan(""));
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = std::nan("");
      const auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      row.push_back(ec == std::errc() && p == c.data() + c.size() ? v : std::nan(""));
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(ErrorCode::IoError, "CSV has no header");
  return t;
}

std::string report_json(const VerificationReport& rep, const ReportExtras& extras) {
  using nlohmann::json;
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["meta"] = {{"config_hash", rep.meta.config_hash}, {"seed", rep.meta.seed},       {"modes", rep.meta.modes},
               {"dt_init", num(rep.meta.dt_init)},   {"dt_max", num(rep.meta.dt_max)}, {"tol", num(rep.meta.tol)},
               {"t_end", num(rep.meta.t_end)}};
  json checks = json::array();
  bool all = true;
  for (const auto& ck : rep.checks) {
    json values = json::object();
    for (const auto& [k, v] : ck.values) values[k] = num(v);
    checks.push_back({{"name", ck.name},
                      {"anchor", ck.anchor},
                      {"value", num(ck.value)},
                      {"values", values},
                      {"bound", ck.has_bound ? num(ck.bound) : json(nullptr)},
                      {"applicable", ck.applicable},
                      {"pass", ck.pass},
                      {"error", ck.error},
                      {"refined", ck.refined},
                      {"stability", ck.refined ? num(ck.stability) : json(nullptr)},
                      {"stable", ck.stable}});
    all = all && ck.pass && ck.stable;
  }
  j["checks"] = checks;
  j["all_pass"] = all;
  if (extras.blowup_r || extras.blowup_grad_u) {
    json b = json::object();
    if (extras.blowup_r) b["sup_R"] = fit_json(*extras.blowup_r);
    if (extras.blowup_grad_u) b["sup_grad_u_sq"] = fit_json(*extras.blowup_grad_u);
    j["blowup"] = b;
  }
  if (extras.ensemble) {
    const EnsembleTable& t = *extras.ensemble;
    json summary = json::array();
    for (const auto& s : t.summary) {
      summary.push_back({{"level", s.level},
                         {"members", s.members},
                         {"min_inf_rho0", num(s.min_inf_rho0)},
                         {"min_inf_rho1", num(s.min_inf_rho1)}});
    }
    json failures = json::array();
    for (const auto& [i, msg] : t.failures) failures.push_back({{"member", i}, {"error", msg}});
    j["ensemble"] = {{"summary", summary},
                     {"failures", failures},
                     {"curvature_sign_preserved", t.curvature_sign_preserved}};
  }
  return j.dump(2) + "\n";
}

std::string SvgPlot::render(int width, int height) const {
  const double ml = 70, mr = 20, mt = 36, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;
  const auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  const auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  const auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!logx || x > 0.0) && (!logy || y > 0.0);
  };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12 * std::max(1.0, std::abs(y0))) {
    const double pad = 0.5 * std::max(1e-6, std::abs(y0) * 1e-3);
    y0 -= pad, y1 += pad;
  }
  const auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * pw; };
  const auto py = [&](double v) { return mt + ph - (ty(v) - y0) / (y1 - y0) * ph; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
       "\" fill=\"white\"/>\n";
  o += "<text x=\"" + fixed(width / 2.0) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
       xml_escape(title) + "</text>\n";
  o += "<rect x=\"" + fixed(ml) + "\" y=\"" + fixed(mt) + "\" width=\"" + fixed(pw) + "\" height=\"" + fixed(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = x0 + (x1 - x0) * i / kTicks, fy = y0 + (y1 - y0) * i / kTicks;
    const double vx = logx ? std::pow(10.0, fx) : fx, vy = logy ? std::pow(10.0, fy) : fy;
    const double sx = ml + pw * i / kTicks, sy = mt + ph - ph * i / kTicks;
    o += "<line x1=\"" + fixed(sx) + "\" y1=\"" + fixed(mt + ph) + "\" x2=\"" + fixed(sx) + "\" y2=\"" +
         fixed(mt + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fixed(sx) + "\" y=\"" + fixed(mt + ph + 18) + "\" text-anchor=\"middle\">" +
         xml_escape(tick_label(vx)) + "</text>\n";
    o += "<line x1=\"" + fixed(ml - 5) + "\" y1=\"" + fixed(sy) + "\" x2=\"" + fixed(ml) + "\" y2=\"" + fixed(sy) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fixed(ml - 8) + "\" y=\"" + fixed(sy + 4) + "\" text-anchor=\"end\">" +
         xml_escape(tick_label(vy)) + "</text>\n";
  }
  o += "<text x=\"" + fixed(ml + pw / 2) + "\" y=\"" + fixed(height - 10.0) + "\" text-anchor=\"middle\">" +
       xml_escape(xlabel + (logx ? " (log)" : "")) + "</text>\n";
  o += "<text x=\"14\" y=\"" + fixed(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
       fixed(mt + ph / 2) + ")\">" + xml_escape(ylabel + (logy ? " (log)" : "")) + "</text>\n";

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += fixed(px(s.x[i])) + "," + fixed(py(s.y[i]));
    }
    const char* color = colors[k % 6];
    o += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"" +
         (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + " points=\"" + pts + "\"/>\n";
    const double ly = mt + 14.0 + 16.0 * k;
    o += "<line x1=\"" + fixed(ml + pw - 150) + "\" y1=\"" + fixed(ly - 4) + "\" x2=\"" + fixed(ml + pw - 125) +
         "\" y2=\"" + fixed(ly - 4) + "\" stroke=\"" + color + "\"" + (s.dashed ? " stroke-dasharray=\"6 4\"" : "") +
         "/>\n";
    o += "<text x=\"" + fixed(ml + pw - 120) + "\" y=\"" + fixed(ly) + "\">" + xml_escape(s.label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace krf
