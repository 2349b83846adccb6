#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace purcell::cli {

enum ExitCode { kOk = 0, kUsage = 2, kNumeric = 3, kInconsistent = 4 };

/// Runs one command line (without the program name). Results go to files;
/// summaries to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace purcell::cli
