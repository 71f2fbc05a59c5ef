#pragma once

#include <iosfwd>

namespace netlqr {

/// Command-line entry point. Returns the process exit code:
/// 0 success, 1 usage, 2 invalid configuration, 3 budget exceeded, 4 numerical failure.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace netlqr
