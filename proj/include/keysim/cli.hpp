#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace keysim {

/// Runs the `keysim` command line. `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors, 2 on input or analysis errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace keysim
