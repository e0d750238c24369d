#pragma once

namespace ghostcert {

// Selects between the OpenMP kernel and its serial reference. Both produce
// bit-identical results for a fixed seed.
enum class Execution { serial, parallel };

int max_threads();

}  // namespace ghostcert
