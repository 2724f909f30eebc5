#pragma once

#include <stdexcept>
#include <string>

namespace vantage {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad configuration, missing files, invalid arguments. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

/// Malformed input file. Carries whatever location info the parser had.
struct ParseError : ConfigError {
    using ConfigError::ConfigError;
};

/// Numerical failure (singular systems, divergence). CLI exit code 3.
struct NumericsError : Error {
    using Error::Error;
};

} // namespace vantage
