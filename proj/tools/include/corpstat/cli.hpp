#pragma once

#include <iosfwd>

namespace corpstat {

// Entry point of the `corpstat` tool, with injectable streams for tests.
// Returns the process exit code: 0 success, 1 runtime error, 2 usage error.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace corpstat
