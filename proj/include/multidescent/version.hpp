#pragma once

namespace multidescent {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace multidescent
