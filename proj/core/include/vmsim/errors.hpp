#pragma once

#include <stdexcept>
#include <string>

namespace vmsim {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input data such as a trace file (CLI exit code 3).
class ParseError : public Error {
public:
    using Error::Error;
};

// Invalid argument to an operation: bad dimension, non-finite value, out-of-range.
class InputError : public Error {
public:
    using Error::Error;
};

// Unknown VM/PM/request identifier.
class IdError : public InputError {
public:
    using InputError::InputError;
};

// Problem instance too large for an exhaustive method.
class SizeError : public Error {
public:
    using Error::Error;
};

} // namespace vmsim
