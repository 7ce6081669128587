#pragma once

#include <stdexcept>
#include <string>

namespace g2gan {

// Base of every error the library raises. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised when a loss or metric turns non-finite. `dump_path` names the
// diagnostic file written by the trainer, empty when nothing was written.
class NumericsError : public Error {
 public:
  explicit NumericsError(const std::string& what, std::string dump_path = {})
      : Error(what), dump_path_(std::move(dump_path)) {}

  const std::string& dump_path() const { return dump_path_; }

 private:
  std::string dump_path_;
};

}  // namespace g2gan
