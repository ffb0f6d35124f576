#pragma once

namespace emrec {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kArtifactFormatVersion = 1;

}  // namespace emrec
