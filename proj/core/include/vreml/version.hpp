#pragma once

namespace vreml {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vreml
