#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace bodystate {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed caller input: wrong dimensions, out-of-range symbols, non-finite values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or parameter combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Shoulders coincide in the xz projection, so the yaw is undefined.
class DegenerateAlignmentError : public Error {
 public:
  DegenerateAlignmentError(std::size_t frame_index, double shoulder_distance)
      : Error("degenerate shoulder projection at frame " + std::to_string(frame_index) +
              " (xz distance " + std::to_string(shoulder_distance) + " m)"),
        frame_index_(frame_index) {}

  std::size_t frame_index() const noexcept { return frame_index_; }

 private:
  std::size_t frame_index_;
};

/// Training data that cannot support the requested model.
class TrainingDataError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be inverted is numerically singular.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// No usable frames or symbols were left to work with.
class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

/// File-level failures: missing files, parse errors, bad versions, checksum mismatches.
class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public IoError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : IoError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedVersionError : public IoError {
 public:
  using IoError::IoError;
};

class ChecksumError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace bodystate
