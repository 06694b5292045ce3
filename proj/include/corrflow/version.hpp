#pragma once

namespace corrflow {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace corrflow
