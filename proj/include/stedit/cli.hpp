#pragma once

#include <iosfwd>

namespace stedit {

/// Entry point of the `stedit` command line tool. Returns the process exit
/// code: 0 on success, 1 on runtime failure, 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stedit
