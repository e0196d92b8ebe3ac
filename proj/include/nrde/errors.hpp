#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nrde {

/// Operands of incompatible shape (tensor shapes, vector widths, basis sizes).
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of an operation (log of a0 <= 0, bad interval, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A tensor that was expected to lie in the free Lie algebra does not.
class NotLieElementError : public std::runtime_error {
public:
    NotLieElementError(double residual)
        : std::runtime_error("not a Lie element: reconstruction residual " + std::to_string(residual)),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A solver produced a non-finite state.
class OverflowError : public std::runtime_error {
public:
    OverflowError(const std::string& where, std::size_t index)
        : std::runtime_error("non-finite state in " + where + " at index " + std::to_string(index)),
          index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Malformed input file. Line numbers are 1-based; 0 means "not line specific".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace nrde
