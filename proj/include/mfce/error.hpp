#pragma once

#include <stdexcept>
#include <string>

namespace mfce {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or channel counts do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An input window is too short for the network's receptive field.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A target label index outside [0, S).
class LabelError : public Error {
 public:
  using Error::Error;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite gradients or losses during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline std::string receptive_field_message(long have, long need) {
  return "window shorter than receptive field: " + std::to_string(have) +
         " frames, need at least " + std::to_string(need);
}

}  // namespace mfce
