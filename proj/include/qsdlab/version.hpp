#pragma once

namespace qsdlab {

inline constexpr const char* kVersion = "qsdlab 0.1.0";

}  // namespace qsdlab
