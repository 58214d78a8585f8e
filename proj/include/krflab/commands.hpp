#pragma once

// Subcommands behind the krflab executable. Each writes into cfg.out_dir and returns an exit code:
// 0 success, 1 check failures, 2 configuration error, 3 numerical or I/O failure.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "krflab/io.hpp"

namespace krf {

enum ExitCode : int { kExitOk = 0, kExitChecks = 1, kExitConfig = 2, kExitNumerical = 3 };

struct CommandOptions {
  bool quiet = false;
  int threads = 0;                      // 0: hardware concurrency
  std::optional<std::string> snapshot;  // state to analyse instead of the configured initial metric
};

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> files;  // written, in order
  std::vector<std::string> messages;
};

/// Run the subcommand body, mapping exceptions to exit codes and messages.
CommandResult run_command(const std::function<CommandResult()>& body);

CommandResult cmd_simulate(const RunConfig& cfg, const CommandOptions& opts = {});
CommandResult cmd_bergman(const RunConfig& cfg, const CommandOptions& opts = {});
CommandResult cmd_verify(const RunConfig& cfg, const CommandOptions& opts = {});
CommandResult cmd_ensemble(const RunConfig& cfg, const CommandOptions& opts = {});
CommandResult cmd_green(const RunConfig& cfg, const CommandOptions& opts = {});
CommandResult cmd_entropy(const RunConfig& cfg, const CommandOptions& opts = {});

struct PlotRequest {
  std::string input;  // CSV with a header row
  std::string x;
  std::vector<std::string> y;
  bool logx = false, logy = false;
  std::string output;  // SVG path
  std::string title;
};
CommandResult cmd_plot(const PlotRequest& req);

}  // namespace krf
