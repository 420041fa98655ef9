#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nmd::cli {

/// Runs the command line `args` (without the program name). Returns the
/// process exit status: 0 on success, 2 on usage errors, 1 otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nmd::cli
