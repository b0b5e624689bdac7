#pragma once

#include <stdexcept>
#include <string>

namespace prism {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A value violates a documented invariant (e.g. probabilities not summing to one).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Inconsistent or impossible configuration (even kernel, region too short, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. The message carries the row/column location.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace prism
