#pragma once

#include <stdexcept>
#include <string>

namespace shapefeat {

enum class ErrorCategory {
    input,
    format,
    io,
    convergence,
    definiteness,
    numeric,
};

inline const char* to_string(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::input: return "input error";
    case ErrorCategory::format: return "format error";
    case ErrorCategory::io: return "I/O error";
    case ErrorCategory::convergence: return "convergence error";
    case ErrorCategory::definiteness: return "definiteness error";
    case ErrorCategory::numeric: return "numeric error";
    }
    return "error";
}

/// Base exception for the library; carries a category the CLI maps to an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorCategory::input, what) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ErrorCategory::format, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

class DefinitenessError : public Error {
public:
    explicit DefinitenessError(const std::string& what)
        : Error(ErrorCategory::definiteness, what) {}
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double final_residual)
        : Error(ErrorCategory::convergence, what), final_residual_(final_residual) {}

    /// Relative residual ||Ax - b|| / ||b|| at the last iterate.
    double final_residual() const noexcept { return final_residual_; }

private:
    double final_residual_;
};

} // namespace shapefeat
