#pragma once

#include <stdexcept>
#include <string>

namespace rrnet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
  using Error::Error;
};
class BoundsError : public Error {
  using Error::Error;
};
class ConfigError : public Error {
  using Error::Error;
};
class NumericError : public Error {
  using Error::Error;
};
class StateError : public Error {
  using Error::Error;
};
class ContractError : public Error {
  using Error::Error;
};
class IoError : public Error {
  using Error::Error;
};
class DataError : public Error {
  using Error::Error;
};
class FormatError : public Error {
  using Error::Error;
};
class ResourceError : public Error {
  using Error::Error;
};

}  // namespace rrnet
