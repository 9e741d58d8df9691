#pragma once

namespace hsd {

inline constexpr const char* kVersion = "0.1.0";

} // namespace hsd
