#pragma once

#include "lossnet/config.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace lossnet {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitCensored = 4,
};

struct CommandContext {
  std::filesystem::path out_dir;
  unsigned threads = 1;
  std::ostream* log = nullptr;  ///< progress and warnings; may be null
};

const std::vector<std::string>& command_names();

/// Runs one command; output files are removed again if it throws.
int run_command(const std::string& name, const RunConfig& cfg, const CommandContext& ctx);

int cmd_equilibria(const RunConfig& cfg, const CommandContext& ctx);
int cmd_ode(const RunConfig& cfg, const CommandContext& ctx);
int cmd_rate(const RunConfig& cfg, const CommandContext& ctx);
int cmd_action(const RunConfig& cfg, const CommandContext& ctx);
int cmd_tree(const RunConfig& cfg, const CommandContext& ctx);
int cmd_simulate(const RunConfig& cfg, const CommandContext& ctx);
int cmd_exit_times(const RunConfig& cfg, const CommandContext& ctx);
int cmd_invariant(const RunConfig& cfg, const CommandContext& ctx);
int cmd_pipeline(const RunConfig& cfg, const CommandContext& ctx);

}  // namespace lossnet
