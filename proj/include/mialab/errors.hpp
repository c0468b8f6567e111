#pragma once

#include <stdexcept>
#include <string>

namespace mia {

// Typed failures thrown by the library. The CLI maps ConfigError to exit
// code 2 and every other Error to exit code 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes that do not compose (matrix/vector dimension mismatches).
class DimensionError : public Error {
public:
    using Error::Error;
};

// NaN or Inf produced where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Preconditions on operation arguments violated.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Index or selector out of range.
class RangeError : public Error {
public:
    using Error::Error;
};

// File could not be opened/read/written.
class IoError : public Error {
public:
    using Error::Error;
};

// File exists but its contents do not parse.
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid experiment configuration, rejected before any work starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace mia
