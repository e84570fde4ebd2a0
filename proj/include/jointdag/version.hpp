#pragma once

namespace jointdag {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace jointdag
