#pragma once

#include <string>
#include <vector>

namespace vortexlab::cli {

/// Single entry point behind the vortexlab binary. args excludes the program
/// name. Exit codes: 0 success, 1 runtime failure, 2 unknown command/usage,
/// 3 config error. Every run materializes resolved_config.json and
/// versions.txt in the output directory before computing.
int run(const std::vector<std::string>& args);

} // namespace vortexlab::cli
