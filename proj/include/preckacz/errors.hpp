#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace preckacz {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A triangular factor has a (numerically) zero diagonal entry.
class SingularFactor : public Error {
public:
    SingularFactor(std::size_t index, const std::string& what)
        : Error(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class DegenerateDistribution : public Error {
public:
    using Error::Error;
};

class InvalidSketchSize : public Error {
public:
    using Error::Error;
};

class ZeroRow : public Error {
public:
    using Error::Error;
};

class ConditioningOverflow : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace preckacz
