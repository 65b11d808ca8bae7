#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace couplevar::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kIoError = 2,
  kNotConverged = 3,
};

/// Runs one subcommand (denoise, edges, bench, synth, metrics). `args`
/// excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Expands "--config FILE" into flags. The file holds key=value lines ('#'
/// starts a comment); a key becomes --key unless the same flag is already
/// given on the command line, so explicit flags win. Values true/false stand
/// for switches.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace couplevar::cli
