#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace factcheck {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the command-line tool. `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors and 2 on runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace factcheck
