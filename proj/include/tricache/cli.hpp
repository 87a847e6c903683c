#pragma once

#include <iosfwd>

namespace tricache {

// Entry point of the `tricache` tool. Returns the process exit code:
// 0 success, 1 validation, 2 I/O, 3 internal error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tricache
