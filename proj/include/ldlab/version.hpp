#pragma once

namespace ldlab {
inline constexpr const char* kVersion = "0.1.0";
}
