#pragma once

#include <ostream>

namespace legws {

/// Entry point of the legws tool. Returns the process exit code: 0 on
/// success, 1 for invalid input (usage, parse, version or validation errors),
/// 2 for runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace legws
