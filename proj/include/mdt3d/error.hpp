#pragma once

#include <stdexcept>
#include <string>

namespace mdt3d {

// Error categories map one-to-one onto CLI exit codes (1 config, 2 data, 3 I/O).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mdt3d
