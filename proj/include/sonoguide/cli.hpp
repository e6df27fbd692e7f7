#pragma once

#include <iosfwd>

namespace sonoguide {

/// Entry point of the `sonoguide` command-line tool. Returns 0 on success,
/// 2 on a usage error (message and usage on `err`), 1 on a runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sonoguide
