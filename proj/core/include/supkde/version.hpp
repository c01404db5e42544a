#pragma once

namespace supkde {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace supkde
