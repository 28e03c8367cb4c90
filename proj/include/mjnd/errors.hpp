#pragma once

#include <stdexcept>
#include <string>

namespace mjnd {

/// Base for every error raised by the pipeline. Each subclass maps to one
/// failure family so the CLI can choose an exit code without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed a value outside an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or stage configuration (unknown arch, bad layer stack,
/// unknown config key, type mismatch).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset archive missing or malformed. The message names the offending file.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or violated an integrity check.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was invoked before the stage it depends on.
class PrerequisiteError : public Error {
 public:
  PrerequisiteError(std::string missing_stage, const std::string& what)
      : Error(what), missing_stage_(std::move(missing_stage)) {}

  const std::string& missing_stage() const noexcept { return missing_stage_; }

 private:
  std::string missing_stage_;
};

}  // namespace mjnd
