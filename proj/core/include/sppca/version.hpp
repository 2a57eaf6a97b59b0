#pragma once

namespace sppca {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kOutputSchemaVersion = 1;

}  // namespace sppca
