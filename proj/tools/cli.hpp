#pragma once

// Entry point of the plr command line tool, kept in a library so tests can
// drive it in-process.

#include <iosfwd>

namespace plr::cli {

/// 0 success, 1 usage error, 2 runtime error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace plr::cli
