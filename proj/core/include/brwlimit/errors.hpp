#pragma once

#include <stdexcept>
#include <string>

namespace brwlimit {

enum class ErrorCode {
  kDomain,           // argument outside the operation's domain
  kDivergence,       // psi is infinite where a finite value is needed
  kNoSolution,       // boundary normalization did not converge
  kSubcritical,      // psi(0) <= 0
  kCapExceeded,      // traversal exceeded particle_cap
  kExtinct,          // operation needs a surviving population
  kEmptySample,
  kMissingBeta,
  kNotBinary,        // cascade needs at most two children per node
  kDegenerate,       // statistic undefined on tied/constant data
  kZeroTotal,        // normalization of a zero-mass measure
  kConfig,
  kIo,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kNoSolution: return "no solution";
    case ErrorCode::kSubcritical: return "not supercritical";
    case ErrorCode::kCapExceeded: return "particle cap exceeded";
    case ErrorCode::kExtinct: return "extinct";
    case ErrorCode::kEmptySample: return "empty sample";
    case ErrorCode::kMissingBeta: return "missing beta";
    case ErrorCode::kNotBinary: return "not a binary cascade";
    case ErrorCode::kDegenerate: return "degenerate sample";
    case ErrorCode::kZeroTotal: return "zero total mass";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kIo: return "io error";
  }
  return "error";
}

}  // namespace brwlimit
