#pragma once

#include <stdexcept>
#include <string>

namespace mrsurv {

/// Base for all library errors. The CLI maps each family onto an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or schedule (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// Numeric failure while fitting or estimating (exit code 4).
class FitError : public Error {
public:
    using Error::Error;
};

/// A zero denominator in the doubly robust transform.
class PositivityError : public FitError {
public:
    PositivityError(const std::string& what, double time)
        : FitError(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Argument outside the domain of a curve or function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace mrsurv
