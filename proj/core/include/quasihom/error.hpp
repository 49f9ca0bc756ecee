#pragma once

#include <stdexcept>
#include <string>

namespace quasihom {

enum class ErrorCode {
  kInvalidArgument,
  kDomainError,
  kIndexOutOfRange,
  kIoError,
  kParseError,
  kDimensionMismatch,
  kNonPositiveValue,
  kOutOfExtent,
  kMeshMismatch,
  kNonConvergence,
  kAsymmetricMatrix,
  kRankDeficient,
  kSingularMatrix,
  kNoDescent,
  kLineSearchFailure,
  kBracketingFailure,
  kInvalidSelection,
  kConfigError,
};

const char* to_string(ErrorCode code);

/// Base class of every error thrown by the library. The code lets callers
/// (the CLI in particular) map failures onto exit statuses without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Iterative solve gave up; carries the residual it reached.
class NonConvergence : public Error {
 public:
  NonConvergence(double achieved, const std::string& what);
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace quasihom
