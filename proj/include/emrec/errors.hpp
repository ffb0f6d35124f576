#pragma once

#include <stdexcept>
#include <string>

namespace emrec {

enum class ErrorCode {
  SeparationViolation,
  BoundaryViolation,
  NonPositiveMaterial,
  NonPositiveContrast,
  SingularSystem,
  CflViolation,
  NonFiniteField,
  ProbeOutsideDomain,
  ControlNotConverged,
  NonUniformTimeGrid,
  GridMismatch,
  NoPeaksFound,
  AliasSuspected,
  IllConditionedFit,
  SchemaError,
  UnknownKey,
  CacheCorrupt,
  VersionMismatch,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::SeparationViolation: return "SeparationViolation";
    case ErrorCode::BoundaryViolation: return "BoundaryViolation";
    case ErrorCode::NonPositiveMaterial: return "NonPositiveMaterial";
    case ErrorCode::NonPositiveContrast: return "NonPositiveContrast";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::CflViolation: return "CflViolation";
    case ErrorCode::NonFiniteField: return "NonFiniteField";
    case ErrorCode::ProbeOutsideDomain: return "ProbeOutsideDomain";
    case ErrorCode::ControlNotConverged: return "ControlNotConverged";
    case ErrorCode::NonUniformTimeGrid: return "NonUniformTimeGrid";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NoPeaksFound: return "NoPeaksFound";
    case ErrorCode::AliasSuspected: return "AliasSuspected";
    case ErrorCode::IllConditionedFit: return "IllConditionedFit";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace emrec
