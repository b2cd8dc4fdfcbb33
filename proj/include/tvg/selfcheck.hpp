#pragma once

#include <ostream>

namespace tvg {

// Compact invariant, oracle, and gradient suite behind `tvg selfcheck`.
// Prints one line per check to `out` and returns the number of failures.
int run_selfcheck(std::ostream& out);

}  // namespace tvg
