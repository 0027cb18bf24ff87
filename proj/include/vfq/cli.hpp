#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vfq {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitGeometry = 3, kExitUndefinedMetric = 4 };

/// Runs the `vfq` command line in-process. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vfq
