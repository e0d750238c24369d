#pragma once

namespace ghostcert {

// Library version recorded in every provenance block.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace ghostcert
