#pragma once

namespace pairsim {

inline constexpr const char* kVersion = "1.0.0";

} // namespace pairsim
