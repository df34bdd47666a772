#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jmls::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3 };

/// Runs the `jmls` command line with argv[0] omitted. Normal output goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jmls::cli
