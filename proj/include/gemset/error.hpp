#pragma once

#include <stdexcept>
#include <string>

namespace gemset {

/// Base for every error raised by the library. The CLI maps `is_io()` to
/// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual bool is_io() const noexcept { return false; }
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
    bool is_io() const noexcept override { return true; }
};

class UndefinedFeatureError : public Error {
public:
    using Error::Error;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class RenderDegenerateError : public Error {
public:
    using Error::Error;
};

}  // namespace gemset
