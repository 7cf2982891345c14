#pragma once

#include <stdexcept>
#include <string>

namespace mapeval {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or stream. Carries the 1-based line number when the
/// failure can be pinned to one.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, int line = -1)
        : Error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Operation called with arguments that violate its preconditions.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// Two trajectories share no timestamps within the matching tolerance.
class NoOverlapError : public Error {
public:
    using Error::Error;
};

/// A metric has no defined value on the given input (e.g. empty union,
/// zero matched pairs).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// Point configuration too degenerate for alignment (rank-deficient).
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

}  // namespace mapeval
