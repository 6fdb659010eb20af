#pragma once

#include <string>
#include <vector>

namespace fairvec::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

/// Runs one `fairvec` invocation; args[0] is the program name. Never throws:
/// errors are written to stderr and mapped to an exit code.
int run_cli(const std::vector<std::string>& args);

}  // namespace fairvec::cli
