#pragma once

namespace dualgen {

inline constexpr const char* kToolName = "dualgen";
inline constexpr const char* kToolVersion = "0.1.0";

} // namespace dualgen
