#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lckd::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

/// Parses and runs one command line (args exclude the program name). Never
/// throws; errors are reported on `err` and mapped to an exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lckd::cli
