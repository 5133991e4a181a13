#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace a2net::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kCheckpointError = 4,
};

/// Runs one `a2net` invocation; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace a2net::cli
