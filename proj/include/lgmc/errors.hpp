#pragma once

#include <stdexcept>
#include <string>

namespace lgmc {

// Base for every error raised by the library. The CLI maps each subclass to a
// distinct process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible extents, ranks or channel counts.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated serialized data.
class FormatError : public Error {
public:
    using Error::Error;
};

// A configured size or memory cap would be exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

// Values outside an operation's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// A user-supplied function produced a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

}  // namespace lgmc
