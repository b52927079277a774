#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace codisp {

/// Runs the command line (arguments after the program name). Returns the
/// process exit code: 0 success, 2 usage error, 3 input-format error,
/// 4 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace codisp
