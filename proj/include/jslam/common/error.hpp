#pragma once

#include <stdexcept>
#include <string>

namespace jslam {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonPositiveDepth : public Error {
 public:
  NonPositiveDepth() : Error("point has non-positive depth") {}
};

class KindMismatch : public Error {
 public:
  using Error::Error;
};

class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

class EmptyMap : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Scenario / artifact parse failure. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace jslam
