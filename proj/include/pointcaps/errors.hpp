#pragma once

#include <stdexcept>
#include <string>

namespace pointcaps {

// Exception hierarchy. Everything thrown by the library derives from Error so
// callers can catch one type at the CLI boundary and map it to an exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or rank mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Value outside the mathematical domain of an operation (empty axis, ...).
struct DomainError : Error {
    using Error::Error;
};

// NaN / Inf where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// Bad argument value (negative count, r < 1, label out of range, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// API misuse (backward on non-scalar, ...).
struct UsageError : Error {
    using Error::Error;
};

// Malformed input file; message carries file and line.
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid file with contents violating the expected schema.
struct SchemaError : Error {
    using Error::Error;
};

// Invalid or inconsistent configuration; message names the offending key.
struct ConfigError : Error {
    using Error::Error;
};

// Data-dependent initialization failure (k-means with too few samples, ...).
struct InitError : Error {
    using Error::Error;
};

// Checkpoint/config mismatch or unreadable artifact.
struct LoadError : Error {
    using Error::Error;
};

// Input degenerate for the requested transform (all points identical, ...).
struct DegenerateInputError : Error {
    using Error::Error;
};

}  // namespace pointcaps
