#pragma once

#include <stdexcept>
#include <string>

namespace resync {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Out-of-range model or solver parameters.
class InvalidParams : public Error {
 public:
  using Error::Error;
};

// X - mu*V lost rank in the QR retraction; the step size is too large.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

// The iterative eigensolver did not reach its residual tolerance.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

// A finite-difference probe was requested at a point where f is not smooth.
class NonSmoothPoint : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  enum class Kind { kSyntax, kInvalidRotation, kInvalidGraph };

  ParseError(Kind kind, int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

}  // namespace resync
