#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qdb {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotNormalized : public Error {
 public:
  using Error::Error;
};

/// A quantum handle was measured a second time.
class AlreadyConsumed : public Error {
 public:
  using Error::Error;
};

class UnknownHandle : public Error {
 public:
  using Error::Error;
};

/// A message arrived that is not legal for the session's current phase.
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// rtt_to_distance was asked for a time of flight shorter than the processing delay.
class NegativeElapsed : public Error {
 public:
  using Error::Error;
};

/// The event queue drained while a required party had not finished.
class DeadlockedTrial : public Error {
 public:
  using Error::Error;
};

class InsufficientTestRounds : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Wraps an error raised inside a Monte Carlo trial with the trial index.
class TrialError : public Error {
 public:
  TrialError(std::uint64_t trial, const std::string& what)
      : Error("trial " + std::to_string(trial) + ": " + what), trial_(trial) {}

  std::uint64_t trial() const noexcept { return trial_; }

 private:
  std::uint64_t trial_;
};

}  // namespace qdb
