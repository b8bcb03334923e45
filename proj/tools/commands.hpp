#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fcndepth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification or metric failure
inline constexpr int kExitUsage = 2;    // usage or input error

/// Runs the command line `args` (without the program name). Machine-readable
/// documents go to `out`, diagnostics and human summaries to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fcndepth::cli
