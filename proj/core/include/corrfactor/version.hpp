#pragma once

namespace corrfactor {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace corrfactor
