#pragma once

namespace photoloss {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace photoloss
