#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace feedsim {

// Stable error codes. The string form is part of the HTTP API contract
// (docs/api.md) and must not change between versions.
enum class ErrorCode {
  // domain model
  SequenceGap,
  DanglingReference,
  DoubleDelete,
  DuplicateId,
  UnknownViewer,
  UnknownActor,
  // scenario packs
  MalformedDocument,
  UnknownField,
  MissingRequiredField,
  InvalidExpression,
  PackInvalid,
  // trigger engine
  UnknownPredicate,
  ScenarioNotRunning,
  HintBudgetExhausted,
  TransferScenario,
  NoMoreHints,
  CannotRestartCleared,
  // agent runtime
  MissingPlaceholder,
  BackendUnavailable,
  // session service
  UnknownPack,
  UnknownSession,
  UnknownParticipant,
  EmptyParticipants,
  ScenarioConcluded,
  ScenarioStillRunning,
  SessionFinished,
  UnknownTarget,
  EmptyBody,
  BadRequest,
  ReplayMismatch,
  IoError,
  Internal,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SequenceGap: return "SequenceGap";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::DoubleDelete: return "DoubleDelete";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownViewer: return "UnknownViewer";
    case ErrorCode::UnknownActor: return "UnknownActor";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::MissingRequiredField: return "MissingRequiredField";
    case ErrorCode::InvalidExpression: return "InvalidExpression";
    case ErrorCode::PackInvalid: return "PackInvalid";
    case ErrorCode::UnknownPredicate: return "UnknownPredicate";
    case ErrorCode::ScenarioNotRunning: return "ScenarioNotRunning";
    case ErrorCode::HintBudgetExhausted: return "HintBudgetExhausted";
    case ErrorCode::TransferScenario: return "TransferScenario";
    case ErrorCode::NoMoreHints: return "NoMoreHints";
    case ErrorCode::CannotRestartCleared: return "CannotRestartCleared";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::UnknownPack: return "UnknownPack";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownParticipant: return "UnknownParticipant";
    case ErrorCode::EmptyParticipants: return "EmptyParticipants";
    case ErrorCode::ScenarioConcluded: return "ScenarioConcluded";
    case ErrorCode::ScenarioStillRunning: return "ScenarioStillRunning";
    case ErrorCode::SessionFinished: return "SessionFinished";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::EmptyBody: return "EmptyBody";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

/// Exception carrying a stable code plus optional structured details.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  nlohmann::json to_json() const {
    return {{"code", std::string(to_string(code_))}, {"message", what()}, {"details", details_}};
  }

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              nlohmann::json details = nlohmann::json::object()) {
  throw Error(code, message, std::move(details));
}

}  // namespace feedsim
