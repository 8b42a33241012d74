#pragma once

#include <stdexcept>
#include <string>

namespace tmm {

// Error taxonomy. The CLI maps ConfigError to exit code 2 and NumericalError
// to exit code 3; everything else is a programming or input error.

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input that is well-formed but makes the requested object singular
// (e.g. coincident points in a Gram matrix).
class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A point outside the domain of a map or model state space.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tmm
