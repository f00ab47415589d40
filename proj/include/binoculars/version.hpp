#pragma once

namespace binoculars {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace binoculars
