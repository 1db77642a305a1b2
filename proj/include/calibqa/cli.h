#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace calibqa {

// Runs the command-line tool on `args` (without the program name) and
// returns the process exit code. Errors are reported on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace calibqa
