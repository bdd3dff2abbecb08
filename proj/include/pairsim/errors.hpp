#pragma once

#include <stdexcept>
#include <string>

namespace pairsim {

// Error categories map onto CLI exit codes:
//   ConfigError    -> 2 (bad or inconsistent configuration / schema)
//   NumericalError -> 3 (solver failure, undefined estimate, degenerate fit)
//   IoError        -> 4 (file system, parse, serialization)
// Precondition violations on library calls throw std::invalid_argument and
// are treated as numerical errors by the CLI.

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pairsim
