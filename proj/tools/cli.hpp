#pragma once

// Command-line front end. Kept as a library so tests can drive it without
// spawning processes.

#include <ostream>
#include <string_view>

namespace autoloop::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kInputError = 2, kInternalError = 3 };

/// Parses argv, dispatches to the subcommand and maps exceptions to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace autoloop::cli
