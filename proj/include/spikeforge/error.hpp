#pragma once

#include <stdexcept>
#include <string>

namespace spikeforge {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, model tables or expressions (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Failure while the simulation is running (exit code 2).
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written, or its contents are corrupt
/// (exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spikeforge
