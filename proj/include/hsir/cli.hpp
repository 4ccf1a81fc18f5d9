#pragma once

#include <iosfwd>

namespace hsir {

// Exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_internal = 1;
inline constexpr int exit_usage = 2;
inline constexpr int exit_infeasible = 3;

// Entry point of the `hsir` tool: synth, degrade, restore, evaluate,
// export-png. Results go to `out`, progress and diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace hsir
