#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mdat::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 on success, nonzero with a diagnostic on `err` otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mdat::cli
