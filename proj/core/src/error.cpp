#include "quasihom/error.hpp"

namespace quasihom {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDomainError: return "domain-error";
    case ErrorCode::kIndexOutOfRange: return "index-out-of-range";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNonPositiveValue: return "nonpositive-value";
    case ErrorCode::kOutOfExtent: return "out-of-extent";
    case ErrorCode::kMeshMismatch: return "mesh-mismatch";
    case ErrorCode::kNonConvergence: return "non-convergence";
    case ErrorCode::kAsymmetricMatrix: return "asymmetric-matrix";
    case ErrorCode::kRankDeficient: return "rank-deficient";
    case ErrorCode::kSingularMatrix: return "singular-matrix";
    case ErrorCode::kNoDescent: return "no-descent";
    case ErrorCode::kLineSearchFailure: return "line-search-failure";
    case ErrorCode::kBracketingFailure: return "bracketing-failure";
    case ErrorCode::kInvalidSelection: return "invalid-selection";
    case ErrorCode::kConfigError: return "config-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

ParseError::ParseError(int line, const std::string& what)
    : Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

NonConvergence::NonConvergence(double achieved, const std::string& what)
    : Error(ErrorCode::kNonConvergence, what + " (achieved residual " + std::to_string(achieved) + ")"),
      achieved_(achieved) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace quasihom
