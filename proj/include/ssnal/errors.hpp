#pragma once

#include <stdexcept>
#include <string>

namespace ssnal {

/// Vector or matrix lengths that do not fit together.
class dimension_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation requested from an operator backend that cannot provide it.
class capability_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed problem data (empty dimensions, non-finite entries, bad weights).
class validation_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Factorization breakdown, NaN/Inf iterates, or a line search that found no descent.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file could not be parsed; carries the 1-based line number (0 if not line-related).
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& what, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
    {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

} // namespace ssnal
