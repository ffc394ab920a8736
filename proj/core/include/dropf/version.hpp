#pragma once

namespace dropf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dropf
