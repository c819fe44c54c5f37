#pragma once

namespace betkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace betkit
