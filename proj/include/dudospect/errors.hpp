#pragma once

#include <stdexcept>
#include <string>

namespace dudospect {

// Base class for all library errors. CLI exit codes: validation-type
// errors map to 2, numerical failures to 3, anything else to 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration (bad dimensions, inconsistent settings).
struct ConfigError : Error {
    using Error::Error;
};

// Tensor/geometry shape mismatch.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid input data (NaN, negative counts, empty reference, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Degenerate statistical input (e.g. zero-variance paired differences).
struct DegenerateInputError : ValidationError {
    using ValidationError::ValidationError;
};

// Numerical failure during iteration (NaN in MLEM or training).
struct NumericalError : Error {
    using Error::Error;
};

// Filesystem / serialization failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace dudospect
