#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace psfunmix {

/// Argument outside the admissible set (theta outside its open interval, delta <= 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rank-deficient or ill-conditioned dictionary. Carries the reciprocal
/// condition number of G^T G that triggered the failure.
class ConditioningError : public std::runtime_error {
public:
    ConditioningError(const std::string& what, double reciprocal_condition)
        : std::runtime_error(what), rcond_(reciprocal_condition) {}

    double reciprocal_condition() const noexcept { return rcond_; }

private:
    double rcond_;
};

/// Inconsistent inputs: dimensions, schemas, database contents.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file. `line` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace psfunmix
