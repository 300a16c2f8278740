#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dsid::cli {

enum ExitCode : int {
  kOk = 0,
  kIoFailure = 1,
  kInvalidArguments = 2,
  kInvariantViolation = 3,
};

/// `key = value` lines, `#` comments. Keys are normalized to lower case with
/// '-' replaced by '_'.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Runs one command line (args excludes the program name). Output tables and
/// summaries go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsid::cli
