#pragma once

#include <stdexcept>
#include <string>

namespace mlgc {

// Bad run configuration (flags, rates, thresholds out of range).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files or inconsistent dataset contents.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// In-memory value violates a documented invariant (shape mismatch,
// non-binary labels, asymmetric adjacency, ...).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Optimization produced a non-finite value.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input too large for a dense-solve code path.
struct ScaleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API used out of order (e.g. backward on a spent tape).
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mlgc
