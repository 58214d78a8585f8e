#include <bit>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "krflab/commands.hpp"
#include "krflab/error.hpp"

using namespace krf;
using std::numbers::pi;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

std::string config_message(const std::string& text) {
  try {
    parse_config(text, "t.cfg");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  FAIL("expected ConfigError");
  return {};
}

// Accepts the subset of XML the plot writer produces: declaration, nested elements, attributes, text.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while (i < s.size()) {
    if (s[i] != '<') {
      if (s[i] == '&') {
        const auto semi = s.find(';', i);
        if (semi == std::string::npos || semi - i > 6) return false;
      }
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(s[i]))) return false;
      ++i;
      continue;
    }
    const auto close = s.find('>', i);
    if (close == std::string::npos) return false;
    std::string tag = s.substr(i + 1, close - i - 1);
    i = close + 1;
    if (tag.starts_with("?")) {
      if (!tag.ends_with("?")) return false;
      continue;
    }
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag.starts_with("/")) {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.ends_with("/");
    const std::string name = tag.substr(0, tag.find_first_of(" /"));
    if (name.empty()) return false;
    if (stack.empty()) {
      if (root_seen) return false;
      root_seen = true;
    }
    if (!self_closing) stack.push_back(name);
  }
  return root_seen && stack.empty();
}

std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("krflab_test_io_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("config parses every key and rejects bad input with line numbers") {
  const auto cfg = parse_config(
      "# comment\n"
      "grid.modes = 48   # trailing comment\n"
      "flow.dt_init = 2e-3\n"
      "flow.t_end = 0.5\n"
      "flow.snapshot_times = 0.125, 0.25\n"
      "initial.f = 2:0.1 3:-0.04\n"
      "ensemble.count = 7\n"
      "ensemble.R0 = 0.4\n"
      "ensemble.seed = 18446744073709551615\n"
      "bergman.levels = 1,3\n"
      "checks.enabled = p_volume, q_gauss_bonnet\n"
      "checks.refine = false\n"
      "output.formats = csv json\n");
  CHECK(cfg.modes == 48);
  CHECK(cfg.ctrl.dt_init == 2e-3);
  CHECK(cfg.t_end == 0.5);
  CHECK(cfg.snapshot_times == std::vector<double>{0.125, 0.25});
  CHECK(cfg.initial.at(3) == -0.04);
  CHECK(cfg.ensemble_count == 7);
  CHECK(cfg.seed == 18446744073709551615ULL);
  CHECK(cfg.levels == std::vector<int>{1, 3});
  CHECK(cfg.checks_enabled.size() == 2);
  CHECK_FALSE(cfg.checks_refine);
  CHECK(cfg.formats == std::set<std::string>{"csv", "json"});

  CHECK(config_message("grid.modes = 32\nflow.tend = 1\n").find("t.cfg:2:") != std::string::npos);
  CHECK(config_message("grid.modes = 32\n\nflow.t_end = 0\n").find("t.cfg:3: flow.t_end") != std::string::npos);
  CHECK(config_message("grid.modes = 32\ngrid.modes = 40\n").find("line 1") != std::string::npos);
  CHECK(config_message("grid.modes = 3x\n").find("t.cfg:1:") != std::string::npos);
  CHECK(config_message("no equals sign\n").find("t.cfg:1:") != std::string::npos);
  CHECK(config_message("checks.enabled = z_nothing\n").find("z_nothing") != std::string::npos);
  CHECK(config_message("initial.f = 40:0.1\ngrid.modes = 32\n").find("initial.f") != std::string::npos);
  CHECK(config_message("flow.dt_min = 1\n").find("t.cfg:1:") != std::string::npos);
  CHECK(code_of([] { load_config("/nonexistent/krflab.cfg"); }) == ErrorCode::ConfigError);
}

TEST_CASE("shipped configurations parse") {
  for (const auto& name : {"round", "perturbed", "ensemble", "rough"}) {
    INFO(name);
    CHECK_NOTHROW(load_config(std::string(KRFLAB_SOURCE_DIR) + "/configs/" + name + ".cfg"));
  }
}

TEST_CASE("canonical text round-trips random configurations") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    RunConfig cfg;
    cfg.modes = 8 + static_cast<int>(rng() % 200);
    cfg.t_end = 0.01 + 5.0 * ud(rng);
    cfg.snapshot_times = {cfg.t_end * ud(rng) + 1e-9};
    cfg.initial = {{2, ud(rng) - 0.5}, {2 + static_cast<int>(rng() % 6), 1e-3 * ud(rng)}};
    cfg.r0 = 0.01 + 0.98 * ud(rng);
    cfg.roughness = ud(rng);
    cfg.seed = rng();
    cfg.ctrl.tol = std::pow(10.0, -12.0 * ud(rng));
    cfg.checks_ensemble = rng() % 2;
    cfg.out_dir = "dir" + std::to_string(trial);
    const std::string text = canonical_text(cfg);
    const RunConfig back = parse_config(text);
    CHECK(canonical_text(back) == text);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(back.ctrl.tol == cfg.ctrl.tol);
    CHECK(back.seed == cfg.seed);
  }
}

TEST_CASE("config hash tracks results-relevant keys only") {
  RunConfig a;
  RunConfig b = a;
  b.out_dir = "elsewhere";
  b.formats = {"json"};
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("shortest doubles read back exactly") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20000; ++i) {
    const double v = std::bit_cast<double>(rng());
    if (!std::isfinite(v)) continue;
    const std::string s = format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("snapshots round-trip bit-exactly and reject corruption") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    SnapshotFile s;
    s.t = std::bit_cast<double>(rng() >> 2);
    s.config_hash = rng();
    s.modal.resize(1 + static_cast<int>(rng() % 300));
    for (auto& c : s.modal) c = std::bit_cast<double>(rng() >> 2);
    const SnapshotFile b = decode_snapshot(encode_snapshot(s));
    CHECK(std::bit_cast<std::uint64_t>(b.t) == std::bit_cast<std::uint64_t>(s.t));
    CHECK(b.config_hash == s.config_hash);
    REQUIRE(b.modal.size() == s.modal.size());
    CHECK(std::memcmp(b.modal.data(), s.modal.data(), 8 * s.modal.size()) == 0);
  }
  SnapshotFile s;
  s.modal = Eigen::VectorXd::LinSpaced(16, 0.0, 1.0);
  const std::string good = encode_snapshot(s);
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { decode_snapshot(bad_magic); }) == ErrorCode::VersionMismatch);
  std::string bad_version = good;
  bad_version[8] = 2;
  CHECK(code_of([&] { decode_snapshot(bad_version); }) == ErrorCode::VersionMismatch);
  CHECK(code_of([&] { decode_snapshot(good.substr(0, good.size() - 3)); }) == ErrorCode::IoError);
  CHECK(code_of([&] { decode_snapshot(good.substr(0, 12)); }) == ErrorCode::IoError);

  const std::string dir = scratch_dir("snap");
  save_snapshot(dir + "/a/b.krf", s);
  CHECK(load_snapshot(dir + "/a/b.krf").modal == s.modal);
  CHECK(code_of([&] { load_snapshot(dir + "/missing.krf"); }) == ErrorCode::IoError);
}

TEST_CASE("CSV tables parse back") {
  const auto t = parse_csv("# comment\na,b\n1,2\n3,x\n");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.column("a") == std::vector<double>{1, 3});
  CHECK(std::isnan(t.column("b")[1]));
  CHECK_THROWS_AS(t.column("c"), Error);
}

TEST_CASE("simulate on the round sphere: constant curvature and byte-identical reruns") {
  RunConfig cfg;
  cfg.modes = 32;
  cfg.out_dir = scratch_dir("sim");
  const auto r1 = cmd_simulate(cfg);
  REQUIRE(r1.exit_code == kExitOk);
  const std::string first = read_file(cfg.out_dir + "/diagnostics.csv");
  const auto t = parse_csv(first);
  CHECK(t.header == std::vector<std::string>{"t", "R_min", "R_max", "sup_grad_u_sq", "vol", "a", "c_s",
                                             "c_s_residual", "W"});
  for (double r : t.column("R_min")) CHECK(std::abs(r - 1.0) <= 1e-8);
  for (double r : t.column("R_max")) CHECK(std::abs(r - 1.0) <= 1e-8);
  CHECK(t.rows.size() == verification_times().size() + 1);
  const auto r2 = cmd_simulate(cfg);
  CHECK(read_file(cfg.out_dir + "/diagnostics.csv") == first);

  const SnapshotFile last = load_snapshot(cfg.out_dir + "/snapshots/snap_012.krf");
  CHECK(last.t == 1.0);
  CHECK(last.config_hash == config_hash_value(cfg));
}

TEST_CASE("Bergman table on the round sphere") {
  RunConfig cfg;
  cfg.modes = 24;
  cfg.levels = {1, 2, 5};
  cfg.out_dir = scratch_dir("bergman");
  REQUIRE(cmd_bergman(cfg).exit_code == kExitOk);
  const auto t = parse_csv(read_file(cfg.out_dir + "/bergman.csv"));
  const auto x = t.column("x"), l = t.column("l"), rho = t.column("rho");
  int integral_rows = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) {
      ++integral_rows;
      CHECK(std::abs(rho[i] - (2.0 * l[i] + 1.0)) <= 1e-8);
    } else if (l[i] == 1.0) {
      CHECK(std::abs(rho[i] - 3.0 / (4.0 * pi)) <= 1e-8);
    }
  }
  CHECK(integral_rows == 3);

  CommandOptions opts;
  opts.snapshot = cfg.out_dir + "/corrupt.krf";
  write_file(*opts.snapshot, "KRFLAB9 not a snapshot");
  const auto res = run_command([&] { return cmd_bergman(cfg, opts); });
  CHECK(res.exit_code == kExitNumerical);
  REQUIRE_FALSE(res.messages.empty());
  CHECK(res.messages[0].find("VersionMismatch") != std::string::npos);
}

TEST_CASE("verify on the round sphere: all-pass JSON, valid SVG, identical bytes on rerun") {
  RunConfig cfg;
  cfg.modes = 24;
  cfg.out_dir = scratch_dir("verify");
  const auto r1 = cmd_verify(cfg);
  CHECK(r1.exit_code == kExitOk);
  const std::string first = read_file(cfg.out_dir + "/report.json");
  const auto j = nlohmann::json::parse(first);
  CHECK(j["schema_version"] == kReportSchemaVersion);
  CHECK(j["all_pass"] == true);
  CHECK(j["checks"].size() == check_names().size());
  CHECK(j["meta"]["config_hash"] == config_hash(cfg));
  for (const auto& name : {"sup_R.svg", "rho_ratio.svg", "green.svg", "entropy.svg"}) {
    INFO(name);
    CHECK(well_formed_xml(read_file(cfg.out_dir + "/" + name)));
  }
  cmd_verify(cfg);
  CHECK(read_file(cfg.out_dir + "/report.json") == first);
}

TEST_CASE("report JSON writes non-finite values as null with sorted keys") {
  VerificationReport rep;
  Check ck;
  ck.name = "x";
  ck.value = std::nan("");
  ck.values["b"] = INFINITY;
  ck.values["a"] = 1.0;
  rep.checks.push_back(ck);
  const std::string text = report_json(rep);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["checks"][0]["value"].is_null());
  CHECK(j["checks"][0]["values"]["b"].is_null());
  CHECK(j["all_pass"] == false);
  CHECK(text.find("\"all_pass\"") < text.find("\"checks\""));
  CHECK(text.find("\"meta\"") < text.find("\"schema_version\""));
}

TEST_CASE("SVG plots stay well formed for degenerate and hostile input") {
  SvgPlot p;
  p.title = "a < b & \"c\"";
  p.logx = p.logy = true;
  p.series.push_back({"empty", {}, {}, false});
  p.series.push_back({"neg", {-1, 0, 1}, {0, -2, 3}, true});
  p.series.push_back({"nan", {std::nan(""), 2}, {1, INFINITY}, false});
  CHECK(well_formed_xml(p.render()));
  SvgPlot flat;
  flat.series.push_back({"flat", {0, 1, 2}, {5, 5, 5}, false});
  CHECK(well_formed_xml(flat.render()));
  CHECK_FALSE(well_formed_xml("<svg><g></svg>"));
}

TEST_CASE("plot renders CSV columns and reports missing ones") {
  const std::string dir = scratch_dir("plot");
  write_file(dir + "/d.csv", "t,a\n1,2\n2,3\n");
  PlotRequest req{dir + "/d.csv", "t", {"a"}, false, false, dir + "/p.svg", ""};
  CHECK(cmd_plot(req).exit_code == kExitOk);
  CHECK(well_formed_xml(read_file(dir + "/p.svg")));
  req.y = {"zz"};
  CHECK(run_command([&] { return cmd_plot(req); }).exit_code == kExitConfig);
}
