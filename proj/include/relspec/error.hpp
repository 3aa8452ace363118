#pragma once

#include <stdexcept>
#include <string>

namespace relspec {

// Contract violations: bad shapes, invalid architectures, malformed inputs.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Problems with data files or their contents (ragged rows, NaN cells, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure, e.g. a diverging training run.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or unknown configuration keys.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ValidationError(what);
}

}  // namespace detail
}  // namespace relspec
