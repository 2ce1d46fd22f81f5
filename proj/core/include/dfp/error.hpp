#pragma once

#include <stdexcept>
#include <string>

namespace dfp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration, bad arguments, or input that fails validation before
/// any data is processed. Maps to CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Input data could not be used (corrupt capture, malformed table, empty
/// result). Maps to CLI exit code 2.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace dfp
