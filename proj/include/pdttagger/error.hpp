#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pdttagger {

enum class ErrorCode {
  // pragma_scan
  UnbalancedBraces,
  PragmaWithoutStatement,
  MalformedRange,
  // rewriter
  AlreadyInstrumented,
  RegionNotFound,
  UnsupportedLayout,
  ManifestSyntax,
  DigestMismatch,
  // profile formats
  ResultSyntax,
  PlanSyntax,
  // counters
  InsufficientCounters,
  UnsupportedEvent,
  WindowMisuse,
  // tuner
  TrialFailed,
  InsufficientTrials,
  DegenerateFit,
  ModelSyntax,
  TrialsSyntax,
  // advisor
  EmptyDataset,
  TreeSyntax,
  DatasetSyntax,
  // generic
  InvalidArgument,
  IoFailure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnbalancedBraces: return "UnbalancedBraces";
    case ErrorCode::PragmaWithoutStatement: return "PragmaWithoutStatement";
    case ErrorCode::MalformedRange: return "MalformedRange";
    case ErrorCode::AlreadyInstrumented: return "AlreadyInstrumented";
    case ErrorCode::RegionNotFound: return "RegionNotFound";
    case ErrorCode::UnsupportedLayout: return "UnsupportedLayout";
    case ErrorCode::ManifestSyntax: return "ManifestSyntax";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::ResultSyntax: return "ResultSyntax";
    case ErrorCode::PlanSyntax: return "PlanSyntax";
    case ErrorCode::InsufficientCounters: return "InsufficientCounters";
    case ErrorCode::UnsupportedEvent: return "UnsupportedEvent";
    case ErrorCode::WindowMisuse: return "WindowMisuse";
    case ErrorCode::TrialFailed: return "TrialFailed";
    case ErrorCode::InsufficientTrials: return "InsufficientTrials";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::ModelSyntax: return "ModelSyntax";
    case ErrorCode::TrialsSyntax: return "TrialsSyntax";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TreeSyntax: return "TreeSyntax";
    case ErrorCode::DatasetSyntax: return "DatasetSyntax";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Exception carrying a stable error code. The message is prefixed with the
/// code name so it can be matched in CLI output.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Non-fatal problem reported alongside a result.
struct Diagnostic {
  std::string code;
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

using Diagnostics = std::vector<Diagnostic>;

}  // namespace pdttagger
