#pragma once

#include <stdexcept>
#include <string>

namespace pacbound {

// Degenerate numeric input (all-zero weights, negative mass, ...).
class DegenerateInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Exhaustive enumeration exceeded the configured outcome/step cap.
class EnumerationLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid experiment/bound/training configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A non-finite value entered the differentiation tape.
class PoisonedTapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Degenerate variational-net output (non-finite mean/logstd).
class PoisonedObjectiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace pacbound
