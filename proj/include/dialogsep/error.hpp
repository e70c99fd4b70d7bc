#pragma once

#include <stdexcept>
#include <string>

namespace dialogsep {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unsupported or malformed file content (codec, channel count, chunk layout).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Precondition violation on an argument (shape, length, range).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A reference signal has zero energy, so projections are undefined.
class DegenerateReferenceError : public Error {
 public:
  using Error::Error;
};

/// An activity mask marks every measurement block as dialog-active.
class NoInactivityError : public Error {
 public:
  using Error::Error;
};

/// Loudness of the signal is not measurable (digital silence).
class CannotNormalizeError : public Error {
 public:
  using Error::Error;
};

/// Invalid session / run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dialogsep
