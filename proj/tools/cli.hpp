#pragma once

#include <iosfwd>

namespace gazeswipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv and runs the selected subcommand. Normal output goes to `out`
/// only when the command succeeds; diagnostics go to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gazeswipe::cli
