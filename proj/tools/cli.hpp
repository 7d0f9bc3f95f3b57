#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chainbt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;  // strategy or backend
inline constexpr int kExitBadInput = 2;    // configuration or data

// Parses `args` (without the program name), runs the subcommand and returns
// the process exit code. The summary goes to `out`; failures are reported
// on `err` as a single JSON line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chainbt::cli
