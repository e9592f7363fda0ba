#pragma once

#include <stdexcept>
#include <string>

namespace dsse {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kNumerical,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Bad input: malformed files, dimension mismatches, out-of-range parameters.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error(ErrorCode::kInvalidArgument, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorCode::kIo, message) {}
};

// Non-convergence, ill-conditioning, NaN/overflow.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error(ErrorCode::kNumerical, message) {}
};

// A runtime invariant the algorithms guarantee was violated.
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& message)
      : Error(ErrorCode::kInternal, message) {}
};

}  // namespace dsse
