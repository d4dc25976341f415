#pragma once

#include <iosfwd>

namespace tome::cli {

enum ExitCode : int { kPass = 0, kUsage = 1, kNumerical = 2, kAcceptance = 3 };

/// Entry point of the `tome` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tome::cli
