#pragma once

#include <string>
#include <vector>

namespace urcod::cli {

/// Runs one CLI invocation (argv without the program name).
/// Returns 0 on success, 1 on user error, 2 on internal error.
int run(const std::vector<std::string>& args);

}  // namespace urcod::cli
