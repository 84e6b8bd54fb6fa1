#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ngse::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kNoConvergedStart = 3,
};

// Runs one invocation. args[0] is the program name. Results go to `out`,
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ngse::cli
