#pragma once

#include <stdexcept>
#include <string>

namespace attsolver {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Precondition / shape violation (caller bug).
struct ContractError : Error {
    using Error::Error;
};

/// State entered a region where the right-hand side is undefined (e.g. r <= 0).
struct SingularStateError : Error {
    using Error::Error;
};

/// Linear solve hit a pivot below the singularity threshold.
struct SingularMatrixError : Error {
    using Error::Error;
};

/// Rational activation denominator vanished at an input.
struct ActivationSingularityError : Error {
    ActivationSingularityError(const std::string& msg, int coord)
        : Error(msg), coordinate(coord) {}
    int coordinate;
};

/// Invalid run configuration (bad key, bad ratio, missing file, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Binary file parse errors. Kept distinct so callers can tell what went wrong.
struct ParseError : Error {
    using Error::Error;
};
struct BadMagicError : ParseError {
    using ParseError::ParseError;
};
struct VersionError : ParseError {
    using ParseError::ParseError;
};
struct TruncationError : ParseError {
    using ParseError::ParseError;
};

} // namespace attsolver
