#pragma once

#include <stdexcept>
#include <string>

namespace arpsim {

// Invalid physical or numerical argument (nonpositive rate, empty sweep, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent configuration / sequence file.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Integration or fitting failed at run time.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace arpsim
