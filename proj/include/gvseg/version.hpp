#pragma once

namespace gvseg {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace gvseg
