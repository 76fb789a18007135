#pragma once

#include <stdexcept>
#include <string>

namespace toposculpt {

// Broad failure classes; each maps onto one CLI exit code.
enum class ErrorKind {
    usage,      // bad arguments or configuration
    input,      // malformed / mismatched input data
    numerical,  // non-finite loss, gradient, or value
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace toposculpt
