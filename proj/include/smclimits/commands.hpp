#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace smclimits {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitInternal = 3 };

struct CommandOptions {
  /// Empty means the built-in default configuration.
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::size_t workers = 1;
};

/// verify-resampling, verify-lln, verify-clt, counterexample, variance-table.
const std::vector<std::string>& command_names();

/// Runs one subcommand, writing artifacts under options.out_dir and a human summary to `out`.
/// Errors are reported on `err` and mapped to the exit-code contract.
int run_command(const std::string& name, const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Applies SMC_LIMITS_LOG (trace, debug, info, warn, error, off) to a stderr logger.
void configure_logging();

}  // namespace smclimits
