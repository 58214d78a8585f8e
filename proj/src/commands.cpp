#include "krflab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "krflab/error.hpp"
#include "krflab/green.hpp"

namespace krf {
namespace {

std::string path_in(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

bool wants(const RunConfig& cfg, const std::string& format) { return cfg.formats.contains(format); }

void emit(CommandResult& res, const RunConfig& cfg, const std::string& name, const std::string& contents) {
  const std::string p = path_in(cfg, name);
  write_file(p, contents);
  res.files.push_back(p);
}

MetricState analysed_state(const RunConfig& cfg, const CommandOptions& opts) {
  if (!opts.snapshot) return cfg.initial_state();
  const SnapshotFile snap = load_snapshot(*opts.snapshot);
  if (snap.modal.size() < 8) throw Error(ErrorCode::GridMismatch, "snapshot has fewer than 8 modes");
  return MetricState::from_modal(Grid::make(static_cast<int>(snap.modal.size())), snap.modal);
}

std::string snapshot_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshots/snap_%03zu.krf", i);
  return buf;
}

SvgPlot sup_curvature_plot(const FlowTrajectory& traj) {
  SvgPlot p;
  p.title = "sup |R| along the flow";
  p.xlabel = "t";
  p.ylabel = "sup |R|";
  p.logx = p.logy = true;
  SvgSeries data{"sup |R|", {}, {}, false};
  double c = 0.0;
  for (const auto& s : traj.snapshots) {
    if (!(s.t > 0.0)) continue;
    const double q = std::max(std::abs(s.diag.r_min), std::abs(s.diag.r_max));
    data.x.push_back(s.t);
    data.y.push_back(q);
    c = std::max(c, q * std::pow(s.t, 2.5));
  }
  SvgSeries guide{"C t^(-5/2)", data.x, {}, true};
  for (double t : guide.x) guide.y.push_back(c * std::pow(t, -2.5));
  p.series = {data, guide};
  return p;
}

SvgPlot kernel_ratio_plot(const FlowTrajectory& traj, const std::vector<int>& levels) {
  SvgPlot p;
  p.title = "Bergman density ratio at t = 1";
  p.xlabel = "x";
  p.ylabel = "rho_1 / rho_0";
  const MetricState s0 = traj.state_at(0.0), s1 = traj.state_at(traj.t_end());
  const auto& nodes = traj.grid->nodes();
  for (int l : levels) {
    if (l > 4) continue;
    const Eigen::VectorXd r0 = bergman_kernel(s0, l).rho.values(), r1 = bergman_kernel(s1, l).rho.values();
    SvgSeries s{"l = " + std::to_string(l), std::vector<double>(nodes.begin(), nodes.end()), {}, false};
    for (Eigen::Index i = 0; i < r0.size(); ++i) s.y.push_back(r1(i) / r0(i));
    p.series.push_back(std::move(s));
  }
  return p;
}

SvgPlot green_plot(const MetricState& state) {
  const CsvTable t = parse_csv(green_csv(state));
  SvgPlot p;
  p.title = "Green function against |log d|";
  p.xlabel = "|log d|";
  p.ylabel = "Gamma";
  p.series.push_back({"Gamma", t.column("abs_log_d"), t.column("gamma"), false});
  return p;
}

SvgPlot entropy_plot(const std::vector<EntropyRecord>& series) {
  SvgPlot p;
  p.title = "W along the coupled flow";
  p.xlabel = "t";
  p.ylabel = "W";
  SvgSeries s{"W", {}, {}, false};
  for (const auto& r : series) {
    s.x.push_back(r.t);
    s.y.push_back(r.w);
  }
  p.series.push_back(std::move(s));
  return p;
}

std::vector<EntropyRecord> entropy_series(const FlowTrajectory& traj, int samples) {
  const MetricState end = traj.state_at(traj.t_end());
  CoupledOptions co;
  co.samples = samples;
  return coupled_w_series(traj, ScalarField(traj.grid, end.u()), co);
}

RunMeta meta_for(const RunConfig& cfg) {
  RunMeta m;
  m.config_hash = config_hash(cfg);
  m.seed = cfg.seed;
  m.modes = cfg.modes;
  m.dt_init = cfg.ctrl.dt_init;
  m.dt_max = cfg.ctrl.dt_max;
  m.tol = cfg.ctrl.tol;
  m.t_end = 1.0;
  return m;
}

}  // namespace

CommandResult run_command(const std::function<CommandResult()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    CommandResult r;
    r.exit_code = e.code() == ErrorCode::ConfigError ? kExitConfig : kExitNumerical;
    r.messages.push_back(std::string("error: ") + e.what());
    return r;
  } catch (const std::exception& e) {
    CommandResult r;
    r.exit_code = kExitNumerical;
    r.messages.push_back(std::string("error: ") + e.what());
    return r;
  }
}

CommandResult cmd_simulate(const RunConfig& cfg, const CommandOptions&) {
  CommandResult res;
  const FlowTrajectory traj = run(cfg.initial_state(), cfg.t_end, cfg.ctrl, cfg.effective_snapshot_times());
  if (wants(cfg, "csv")) emit(res, cfg, "diagnostics.csv", diagnostics_csv(traj));
  if (wants(cfg, "snap")) {
    const std::uint64_t hash = config_hash_value(cfg);
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
      const auto& s = traj.snapshots[i];
      emit(res, cfg, snapshot_name(i), encode_snapshot({kSnapshotVersion, s.t, hash, s.state.f_modal()}));
    }
  }
  if (wants(cfg, "svg")) emit(res, cfg, "sup_R.svg", sup_curvature_plot(traj).render());
  const auto& last = traj.snapshots.back().diag;
  res.messages.push_back("simulated to t = " + format_double(traj.t_end()) + " in " +
                         std::to_string(traj.stats.accepted) + " steps; R in [" + format_double(last.r_min) + ", " +
                         format_double(last.r_max) + "]");
  return res;
}

CommandResult cmd_bergman(const RunConfig& cfg, const CommandOptions& opts) {
  CommandResult res;
  const MetricState st = analysed_state(cfg, opts);
  const std::string csv = bergman_csv(st, cfg.levels);
  emit(res, cfg, "bergman.csv", csv);
  const CsvTable t = parse_csv(csv);
  for (const auto& row : t.rows) {
    if (std::isnan(row[0]) && row.size() >= 3) {
      res.messages.push_back("l = " + format_double(row[1]) + ": int rho dmu = " + format_double(row[2]));
    }
  }
  return res;
}

CommandResult cmd_verify(const RunConfig& cfg, const CommandOptions& opts) {
  CommandResult res;
  const VerifyOptions vo = cfg.verify_options();
  const FlowTrajectory base = run(cfg.initial_state(), 1.0, cfg.ctrl, verification_times());
  VerificationReport rep = cfg.checks_refine ? run_checks_refined(base, cfg.ctrl, vo) : run_checks(base, vo);
  rep.meta = meta_for(cfg);

  ReportExtras extras;
  try {
    const auto fits = blowup_exponent({&base});
    extras.blowup_r = fits[0].r;
    extras.blowup_grad_u = fits[0].grad_u;
  } catch (const Error& e) {
    res.messages.push_back(std::string("blow-up fit skipped: ") + e.what());
  }
  std::optional<EnsembleTable> table;
  if (cfg.checks_ensemble) {
    EnsembleSpec spec = cfg.ensemble_spec();
    spec.threads = opts.threads;
    table = ensemble_scan(spec);
    extras.ensemble = &*table;
  }

  if (wants(cfg, "json")) emit(res, cfg, "report.json", report_json(rep, extras));
  if (wants(cfg, "svg")) {
    emit(res, cfg, "sup_R.svg", sup_curvature_plot(base).render());
    emit(res, cfg, "rho_ratio.svg", kernel_ratio_plot(base, cfg.levels).render());
    emit(res, cfg, "green.svg", green_plot(base.state_at(1.0)).render());
    emit(res, cfg, "entropy.svg", entropy_plot(entropy_series(base, 65)).render());
  }

  int failed = 0;
  for (const auto& ck : rep.checks) {
    const bool ok = ck.pass && ck.stable;
    if (!ok) ++failed;
    res.messages.push_back(std::string(ok ? "PASS " : "FAIL ") + ck.name + "  value " + format_double(ck.value) +
                           (ck.error.empty() ? "" : "  (" + ck.error + ")"));
  }
  if (table) {
    for (const auto& s : table->summary) {
      res.messages.push_back("ensemble level " + std::to_string(s.level) + ": min inf rho0 " +
                             format_double(s.min_inf_rho0) + ", min inf rho1 " + format_double(s.min_inf_rho1));
    }
    if (!table->failures.empty()) ++failed;
  }
  if (failed > 0) res.exit_code = kExitChecks;
  return res;
}

CommandResult cmd_ensemble(const RunConfig& cfg, const CommandOptions& opts) {
  CommandResult res;
  EnsembleSpec spec = cfg.ensemble_spec();
  spec.threads = opts.threads;
  const auto members = run_ensemble(spec);
  const EnsembleTable table = ensemble_scan(spec, members);

  using nlohmann::json;
  json jm = json::array();
  bool ok = table.failures.empty();
  const double horizon = std::min(cfg.r0, spec.horizon);
  for (const auto& m : members) {
    json row{{"member", m.index}, {"error", m.error}};
    if (m.error.empty()) {
      double margin = INFINITY;
      for (const auto& s : m.traj.steps) {
        if (s.t <= horizon) margin = std::min(margin, s.r_min - (cfg.r0 - s.t / 4.0));
      }
      row["rmin_decay_margin"] = margin;
      row["min_curvature"] = m.min_curvature;
      ok = ok && margin >= -1e-6;
      try {
        const auto fit = blowup_exponent({&m.traj})[0];
        row["alpha_R"] = fit.r.alpha;
        row["alpha_grad_u"] = fit.grad_u.alpha;
      } catch (const Error& e) {
        row["blowup_error"] = e.what();
      }
    }
    jm.push_back(row);
  }
  json summary = json::array();
  for (const auto& s : table.summary) {
    summary.push_back({{"level", s.level},
                       {"members", s.members},
                       {"min_inf_rho0", s.min_inf_rho0},
                       {"min_inf_rho1", s.min_inf_rho1}});
    res.messages.push_back("level " + std::to_string(s.level) + ": min inf rho0 " + format_double(s.min_inf_rho0) +
                           ", min inf rho1 " + format_double(s.min_inf_rho1));
  }
  const json doc{{"schema_version", kReportSchemaVersion},
                 {"config_hash", config_hash(cfg)},
                 {"seed", cfg.seed},
                 {"members", jm},
                 {"summary", summary},
                 {"curvature_sign_preserved", table.curvature_sign_preserved},
                 {"all_pass", ok}};
  if (wants(cfg, "csv")) emit(res, cfg, "ensemble.csv", ensemble_csv(table));
  if (wants(cfg, "json")) emit(res, cfg, "ensemble.json", doc.dump(2) + "\n");
  for (const auto& [i, msg] : table.failures) res.messages.push_back("member " + std::to_string(i) + " failed: " + msg);
  if (!ok) res.exit_code = kExitChecks;
  return res;
}

CommandResult cmd_green(const RunConfig& cfg, const CommandOptions& opts) {
  CommandResult res;
  const MetricState st = analysed_state(cfg, opts);
  const GreenProfile gp = green_profile(st);
  const LogBoundFit fit = log_bound_fit(gp, st);
  const GreenChain chain = green_mean_chain(st);
  const nlohmann::json doc{{"schema_version", kReportSchemaVersion},
                           {"modes", st.grid()->modes()},
                           {"mean", gp.mean()},
                           {"equation_residual", gp.equation_residual()},
                           {"flux_residual", gp.flux_residual()},
                           {"c_lower", fit.c_lower},
                           {"c_log", fit.c_log},
                           {"near_pole_slope", fit.near_pole_slope},
                           {"chain", {{"lhs", chain.lhs}, {"rhs", chain.rhs},
                                      {"identity_residual", chain.identity_residual}, {"holds", chain.holds}}}};
  if (wants(cfg, "csv")) emit(res, cfg, "green.csv", green_csv(st));
  if (wants(cfg, "json")) emit(res, cfg, "green.json", doc.dump(2) + "\n");
  if (wants(cfg, "svg")) emit(res, cfg, "green.svg", green_plot(st).render());
  res.messages.push_back("C_lower " + format_double(fit.c_lower) + ", C_log " + format_double(fit.c_log) +
                         ", near-pole slope " + format_double(fit.near_pole_slope));
  if (!chain.holds) res.exit_code = kExitChecks;
  return res;
}

CommandResult cmd_entropy(const RunConfig& cfg, const CommandOptions&) {
  CommandResult res;
  const MetricState init = cfg.initial_state();
  const FlowTrajectory traj = run(init, cfg.t_end, cfg.ctrl, cfg.effective_snapshot_times());
  const auto series = entropy_series(traj, 201);
  const MuEstimate mu0 = mu_estimate(init);
  const MuEstimate mu1 = mu_estimate(traj.state_at(traj.t_end()));
  double min_rate = INFINITY, worst_fd = 0.0;
  for (const auto& r : series) {
    min_rate = std::min(min_rate, r.dwdt_integrand);
    worst_fd = std::max(worst_fd, std::abs(r.dwdt_fd - r.dwdt_integrand) / std::max(std::abs(r.dwdt_integrand), 1e-12));
  }
  const nlohmann::json doc{{"schema_version", kReportSchemaVersion},
                           {"W_initial", series.front().w},
                           {"W_final", series.back().w},
                           {"mu_initial", mu0.value},
                           {"mu_final", mu1.value},
                           {"min_dWdt", min_rate},
                           {"max_fd_relative_error", worst_fd}};
  if (wants(cfg, "csv")) emit(res, cfg, "entropy.csv", entropy_csv(series));
  if (wants(cfg, "json")) emit(res, cfg, "entropy.json", doc.dump(2) + "\n");
  if (wants(cfg, "svg")) emit(res, cfg, "entropy.svg", entropy_plot(series).render());
  res.messages.push_back("W from " + format_double(series.front().w) + " to " + format_double(series.back().w) +
                         "; min dW/dt " + format_double(min_rate) + "; mu " + format_double(mu0.value) + " -> " +
                         format_double(mu1.value));
  if (min_rate < -1e-6) res.exit_code = kExitChecks;
  return res;
}

CommandResult cmd_plot(const PlotRequest& req) {
  CommandResult res;
  if (req.y.empty()) throw Error(ErrorCode::ConfigError, "plot needs at least one y column");
  const CsvTable t = parse_csv(read_file(req.input));
  SvgPlot p;
  p.title = req.title.empty() ? req.input : req.title;
  p.xlabel = req.x;
  p.ylabel = req.y.size() == 1 ? req.y[0] : "value";
  p.logx = req.logx;
  p.logy = req.logy;
  try {
    const auto xs = t.column(req.x);
    for (const auto& y : req.y) p.series.push_back({y, xs, t.column(y), false});
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.detail());
  }
  write_file(req.output, p.render());
  res.files.push_back(req.output);
  return res;
}

}  // namespace krf
