#pragma once

#include <stdexcept>
#include <string>

namespace chainbt {

// Base of every error thrown by the library. The CLI maps the subclasses onto
// exit codes: DataError/ConfigError -> 2, StrategyError/BackendError -> 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV/JSONL rows, gaps, split ranges).
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid parameters or configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A decision function misbehaved (out-of-range action, bad prediction).
class StrategyError : public Error {
public:
    using Error::Error;
};

// The language-model backend failed after exhausting its retries.
class BackendError : public Error {
public:
    using Error::Error;
};

}  // namespace chainbt
