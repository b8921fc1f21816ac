#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace l2sep {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the offending location.
class ParseError : public Error {
public:
    ParseError(const std::string& where, const std::string& what)
        : Error(where + ": " + what), where_(where) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

/// Well-formed data that breaks a model invariant (lb > ub, NaN coefficient, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Bad parameters or configuration files.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical trouble in the LP engine, UCB matrix or network.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Oracle refuses an instance that is too large to enumerate.
class RefusalError : public Error {
public:
    using Error::Error;
};

}  // namespace l2sep
