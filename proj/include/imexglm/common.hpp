#pragma once

#include <stdexcept>
#include <string>

namespace imexglm {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input: tableau schema violations, dimension mismatches, bad numbers.
struct ParseError : Error {
    using Error::Error;
};

/// Violated precondition or bad user request (maps to CLI exit code 2).
struct UsageError : Error {
    using Error::Error;
};

/// Runtime numerical failure: divergence, singular matrices (CLI exit code 1).
struct NumericalError : Error {
    using Error::Error;
};

/// Newton iteration failed; carries the last residual and iteration count.
struct NewtonError : NumericalError {
    NewtonError(const std::string& what, double residual, int iters)
        : NumericalError(what), last_residual(residual), iterations(iters) {}
    double last_residual;
    int iterations;
};

/// Resolvent (I - zA) singular at the requested z.
struct SingularResolventError : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace imexglm
