#pragma once

#include <stdexcept>
#include <string>

namespace farmstate {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad call arguments: out-of-range lags, empty ranges, degenerate windows.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Input data violates an invariant (non-finite values, negative power, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed file content; message carries the 1-based line number.
class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// File structure disagrees with its declared layout (column counts, lengths).
class SchemaError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A mandatory numerical gate failed (eigen residuals, orthonormality, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

// Configuration file problems; message may list several violations.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace farmstate
