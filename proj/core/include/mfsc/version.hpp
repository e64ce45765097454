#pragma once

namespace mfsc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mfsc
