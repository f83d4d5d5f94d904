#pragma once

#include <stdexcept>
#include <string>

namespace zdsc {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class OutOfDomain : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// |rho| = 1 makes Z|X a point mass.
class DegenerateConditional : public Error {
 public:
  using Error::Error;
};

class BracketError : public Error {
 public:
  BracketError(const std::string& what, double power_lo, double power_hi)
      : Error(what), power_lo_(power_lo), power_hi_(power_hi) {}

  double power_lo() const { return power_lo_; }
  double power_hi() const { return power_hi_; }

 private:
  double power_lo_;
  double power_hi_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& key, const std::string& what)
      : Error(key + ": " + what), key_(key) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace zdsc
