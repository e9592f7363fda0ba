#pragma once

namespace dsse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dsse
