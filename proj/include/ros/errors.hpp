#pragma once

#include <stdexcept>
#include <string>

namespace ros {

// Error taxonomy shared by the library and the CLI exit-code mapping.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& what, int line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    int line_number;
};

struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ros
