#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "krflab/commands.hpp"
#include "krflab/error.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> modes;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "configuration file (key = value lines)");
  sub->add_option("--seed", c.seed, "random seed, overrides ensemble.seed");
  sub->add_option("--out", c.out, "output directory, overrides output.dir");
  sub->add_option("--modes", c.modes, "grid size, overrides grid.modes");
  sub->add_flag("--quiet", c.quiet, "print errors only");
}

krf::RunConfig resolve(const Common& c) {
  krf::RunConfig cfg = c.config.empty() ? krf::RunConfig{} : krf::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out_dir = *c.out;
  if (c.modes) cfg.modes = *c.modes;
  cfg.validate();
  return cfg;
}

int thread_cap() {
  const char* env = std::getenv("KRFLAB_THREADS");
  if (!env || !*env) return 0;
  try {
    return std::max(1, std::stoi(env));
  } catch (...) {
    throw krf::Error(krf::ErrorCode::ConfigError, std::string("KRFLAB_THREADS is not a number: ") + env);
  }
}

int finish(const krf::CommandResult& r, bool quiet) {
  for (const auto& m : r.messages) {
    if (r.exit_code >= krf::kExitConfig) {
      std::cerr << m << "\n";
    } else if (!quiet) {
      std::cout << m << "\n";
    }
  }
  if (!quiet && r.exit_code < krf::kExitConfig) {
    for (const auto& f : r.files) std::cout << "wrote " << f << "\n";
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"krflab: normalized Kaehler-Ricci flow on rotation-invariant metrics of CP^1"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::string> snapshot;
  krf::PlotRequest plot;

  auto* simulate = app.add_subcommand("simulate", "integrate the flow, write diagnostics CSV and snapshots");
  auto* bergman = app.add_subcommand("bergman", "Bergman density table for the configured levels");
  auto* verify = app.add_subcommand("verify", "run the check suite, write report.json and SVG plots");
  auto* ensemble = app.add_subcommand("ensemble", "random positively curved ensemble and density scan");
  auto* green = app.add_subcommand("green", "Green function profile and log-bound fit");
  auto* entropy = app.add_subcommand("entropy", "W-entropy along the coupled flow and mu estimates");
  auto* plotc = app.add_subcommand("plot", "plot columns of a CSV file as SVG");

  for (auto* sub : {simulate, bergman, verify, ensemble, green, entropy}) add_common(sub, common);
  for (auto* sub : {bergman, green}) sub->add_option("--snapshot", snapshot, "KRFLAB1 snapshot to analyse");

  plotc->add_option("--input", plot.input, "CSV file")->required();
  plotc->add_option("-x", plot.x, "x column")->required();
  plotc->add_option("-y", plot.y, "y column(s)")->required();
  plotc->add_option("--output", plot.output, "SVG file")->required();
  plotc->add_option("--title", plot.title, "plot title");
  plotc->add_flag("--logx", plot.logx, "logarithmic x axis");
  plotc->add_flag("--logy", plot.logy, "logarithmic y axis");
  plotc->add_flag("--quiet", common.quiet, "print errors only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : krf::kExitConfig;
  }

  const auto result = krf::run_command([&]() -> krf::CommandResult {
    if (plotc->parsed()) return krf::cmd_plot(plot);
    const krf::RunConfig cfg = resolve(common);
    krf::CommandOptions opts;
    opts.quiet = common.quiet;
    opts.threads = thread_cap();
    opts.snapshot = snapshot;
    if (simulate->parsed()) return krf::cmd_simulate(cfg, opts);
    if (bergman->parsed()) return krf::cmd_bergman(cfg, opts);
    if (verify->parsed()) return krf::cmd_verify(cfg, opts);
    if (ensemble->parsed()) return krf::cmd_ensemble(cfg, opts);
    if (green->parsed()) return krf::cmd_green(cfg, opts);
    return krf::cmd_entropy(cfg, opts);
  });
  return finish(result, common.quiet);
}
