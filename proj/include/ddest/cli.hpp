#pragma once

#include <iosfwd>

namespace ddest {

/// Exit codes: 0 ok, 2 configuration error, 3 numeric/runtime error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point of the `ddest` tool, usable in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Code version recorded in run manifests.
const char* version_string();

}  // namespace ddest
