#pragma once

#include <ostream>

namespace resync::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNumericalFailure = 1;
inline constexpr int kUsageError = 2;
inline constexpr int kIoError = 3;

/// Entry point of the `resync` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace resync::cli
