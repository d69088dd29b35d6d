#pragma once

#include <stdexcept>
#include <string>

namespace mvseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scan or label buffer that does not follow the on-disk layout.
class MalformedInput : public Error {
 public:
  using Error::Error;
};

/// Non-physical or inconsistent configuration (sensor, grid, params, CLI).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor/raster shapes that do not agree.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// A point at the sensor origin has no spherical angles.
class DegeneratePoint : public Error {
 public:
  using Error::Error;
};

/// Two views or maps that were built from different clouds.
class SourceMismatch : public Error {
 public:
  using Error::Error;
};

/// Loss or metric over an empty evaluation set.
class UndefinedValue : public Error {
 public:
  using Error::Error;
};

[[noreturn]] void throw_shape(const std::string& what, long expected, long got);

}  // namespace mvseg
