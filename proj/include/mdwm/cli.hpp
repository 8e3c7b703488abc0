#pragma once

// Command-line front end: generate, eval, meta.
//
// Exit codes: 0 success, 1 validation error (including bad flags),
// 2 runtime or numerical error, 3 I/O error.

#include <iosfwd>
#include <string>
#include <vector>

namespace mdwm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitIo = 3;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mdwm::cli
