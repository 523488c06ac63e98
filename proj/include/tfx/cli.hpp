#pragma once

#include <ostream>

namespace tfx::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kParse = 3;
inline constexpr int kInconsistent = 4;

/// Entry point of the tfx command. Results go to out unless --out names a
/// file; diagnostics go to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tfx::cli
