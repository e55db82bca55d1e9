#pragma once

#include <stdexcept>
#include <string>

namespace rholab {

/// Invalid arguments, malformed configuration, schema violations.
/// The CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numerical guard tripped: divergent state, degenerate weights,
/// non-convergent refinement, vacuous fit.  The CLI maps this to exit code 3.
struct NumericalGuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace rholab
