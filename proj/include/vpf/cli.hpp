#pragma once

#include <string>
#include <vector>

namespace vpf::cli {

// Runs one CLI invocation (args exclude the program name). Returns the
// process exit code: 0 success, 1 validation failure, 2 I/O failure,
// 3 numerical failure.
int run(const std::vector<std::string>& args);

}  // namespace vpf::cli
