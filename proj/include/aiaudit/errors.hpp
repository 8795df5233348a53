#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aiaudit {

enum class ErrorKind {
  Format,
  Validation,
  NotFound,
  Load,
  Contract,
  Capability,
  Evidence,
  DegenerateEvidence,
  CannotSplit,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Format: return "format_error";
    case ErrorKind::Validation: return "validation_error";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Load: return "load_error";
    case ErrorKind::Contract: return "contract_error";
    case ErrorKind::Capability: return "capability_error";
    case ErrorKind::Evidence: return "evidence_error";
    case ErrorKind::DegenerateEvidence: return "degenerate_evidence";
    case ErrorKind::CannotSplit: return "cannot_split";
    case ErrorKind::Io: return "io_error";
  }
  return "unknown_error";
}

/// Every failure raised by the toolbox carries a kind so the engine can turn
/// it into a structured finding instead of aborting the audit.
class AuditError : public std::runtime_error {
 public:
  AuditError(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw AuditError(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace aiaudit
