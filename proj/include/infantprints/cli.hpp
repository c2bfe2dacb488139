#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace infantprints::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitExternal = 3;

// Runs the command line `args` (args[0] is the program name) with all
// output going to the given streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace infantprints::cli
