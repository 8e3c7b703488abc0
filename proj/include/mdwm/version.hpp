#pragma once

namespace mdwm {

inline constexpr const char* kToolName = "mdwm";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace mdwm
