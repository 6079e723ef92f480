#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "feedsim/model.hpp"

namespace feedsim {

enum class ToxicityCause { ChecklistItem, Rally, Escalation };
enum class ConclusionReason { Cleared, Timeout, Escalated, ManualAdvance };
enum class VerdictSource { Pattern, Model, Fallback };

inline std::string_view to_string(ToxicityCause c) {
  switch (c) {
    case ToxicityCause::ChecklistItem: return "ChecklistItem";
    case ToxicityCause::Rally: return "Rally";
    case ToxicityCause::Escalation: return "Escalation";
  }
  return "ChecklistItem";
}

inline std::string_view to_string(ConclusionReason r) {
  switch (r) {
    case ConclusionReason::Cleared: return "Cleared";
    case ConclusionReason::Timeout: return "Timeout";
    case ConclusionReason::Escalated: return "Escalated";
    case ConclusionReason::ManualAdvance: return "ManualAdvance";
  }
  return "Cleared";
}

inline std::string_view to_string(VerdictSource s) {
  switch (s) {
    case VerdictSource::Pattern: return "Pattern";
    case VerdictSource::Model: return "Model";
    case VerdictSource::Fallback: return "Fallback";
  }
  return "Pattern";
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const Enum (&values)[N], const char* what) {
  for (Enum v : values)
    if (to_string(v) == s) return v;
  fail(ErrorCode::MalformedDocument, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

inline constexpr ToxicityCause kAllCauses[] = {ToxicityCause::ChecklistItem, ToxicityCause::Rally,
                                               ToxicityCause::Escalation};
inline constexpr ConclusionReason kAllReasons[] = {ConclusionReason::Cleared, ConclusionReason::Timeout,
                                                   ConclusionReason::Escalated, ConclusionReason::ManualAdvance};
inline constexpr VerdictSource kAllSources[] = {VerdictSource::Pattern, VerdictSource::Model,
                                                VerdictSource::Fallback};

using PredicateAssignment = std::map<std::string, bool>;

/// Everything needed to (re)initialize a scenario run, embedded in the log so
/// replay never needs the pack file.
struct ScenarioSetup {
  std::string scenario_id;
  std::size_t index = 0;
  bool is_transfer = false;
  std::vector<Actor> actors;
  std::vector<FeedPost> posts;
  std::vector<Comment> comments;
  int toxicity = 0;
  std::vector<std::string> checklist;
  SimTime deadline_at{0};

  friend bool operator==(const ScenarioSetup&, const ScenarioSetup&) = default;
};

namespace ev {

struct PostCreated { FeedPost post; friend bool operator==(const PostCreated&, const PostCreated&) = default; };
struct PostDeleted { PostId post_id; friend bool operator==(const PostDeleted&, const PostDeleted&) = default; };
struct CommentCreated { Comment comment; friend bool operator==(const CommentCreated&, const CommentCreated&) = default; };
struct CommentDeleted { CommentId comment_id; friend bool operator==(const CommentDeleted&, const CommentDeleted&) = default; };
struct ReactionAdded {
  PostId post_id;
  Party author;
  friend bool operator==(const ReactionAdded&, const ReactionAdded&) = default;
};
struct DmSent { DirectMessage message; friend bool operator==(const DmSent&, const DmSent&) = default; };
struct ChecklistItemCompleted {
  std::string item_id;
  friend bool operator==(const ChecklistItemCompleted&, const ChecklistItemCompleted&) = default;
};
struct ToxicityChanged {
  int old_value = 0;
  int new_value = 0;
  ToxicityCause cause = ToxicityCause::ChecklistItem;
  friend bool operator==(const ToxicityChanged&, const ToxicityChanged&) = default;
};
struct HintIssued {
  std::string hint_id;
  std::size_t index = 0;
  friend bool operator==(const HintIssued&, const HintIssued&) = default;
};
struct ScenarioStarted { ScenarioSetup setup; friend bool operator==(const ScenarioStarted&, const ScenarioStarted&) = default; };
struct ScenarioRestarted {
  ScenarioSetup setup;
  friend bool operator==(const ScenarioRestarted&, const ScenarioRestarted&) = default;
};
struct ScenarioConcluded {
  ConclusionReason reason = ConclusionReason::Cleared;
  friend bool operator==(const ScenarioConcluded&, const ScenarioConcluded&) = default;
};
struct TriggerFired {
  std::string rule_id;
  ActorId actor;
  friend bool operator==(const TriggerFired&, const TriggerFired&) = default;
};
struct JudgeVerdictRecorded {
  std::string message_id;
  PredicateAssignment assignment;
  std::map<std::string, VerdictSource> sources;
  std::map<std::string, std::string> rationale;  // research export only
  friend bool operator==(const JudgeVerdictRecorded&, const JudgeVerdictRecorded&) = default;
};
struct SessionFinished { friend bool operator==(const SessionFinished&, const SessionFinished&) = default; };

}  // namespace ev

using EventBody = std::variant<ev::PostCreated, ev::PostDeleted, ev::CommentCreated, ev::CommentDeleted,
                               ev::ReactionAdded, ev::DmSent, ev::ChecklistItemCompleted, ev::ToxicityChanged,
                               ev::HintIssued, ev::ScenarioStarted, ev::ScenarioRestarted, ev::ScenarioConcluded,
                               ev::TriggerFired, ev::JudgeVerdictRecorded, ev::SessionFinished>;

inline constexpr const char* kEventKindNames[] = {
    "PostCreated",  "PostDeleted",     "CommentCreated",    "CommentDeleted",   "ReactionAdded",
    "DmSent",       "ChecklistItemCompleted", "ToxicityChanged", "HintIssued",  "ScenarioStarted",
    "ScenarioRestarted", "ScenarioConcluded", "TriggerFired", "JudgeVerdictRecorded", "SessionFinished"};

static_assert(std::size(kEventKindNames) == std::variant_size_v<EventBody>);

struct SessionEvent {
  std::uint64_t seq = 0;
  SimTime at{0};
  EventBody body;

  std::string_view kind() const { return kEventKindNames[body.index()]; }

  template <typename T>
  const T* as() const { return std::get_if<T>(&body); }

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

// ---- JSON ----------------------------------------------------------------------

inline nlohmann::json setup_json(const ScenarioSetup& s) {
  return {{"scenarioId", s.scenario_id}, {"index", s.index},          {"isTransfer", s.is_transfer},
          {"actors", s.actors},          {"posts", s.posts},          {"comments", s.comments},
          {"toxicity", s.toxicity},      {"checklist", s.checklist},  {"deadlineAt", s.deadline_at.count()}};
}

inline ScenarioSetup setup_from_json(const nlohmann::json& j) {
  ScenarioSetup s;
  s.scenario_id = j.at("scenarioId").get<std::string>();
  s.index = j.at("index").get<std::size_t>();
  s.is_transfer = j.at("isTransfer").get<bool>();
  s.actors = j.at("actors").get<std::vector<Actor>>();
  s.posts = j.at("posts").get<std::vector<FeedPost>>();
  s.comments = j.at("comments").get<std::vector<Comment>>();
  s.toxicity = j.at("toxicity").get<int>();
  s.checklist = j.at("checklist").get<std::vector<std::string>>();
  s.deadline_at = SimTime{j.at("deadlineAt").get<std::int64_t>()};
  return s;
}

inline nlohmann::json payload_json(const EventBody& body) {
  using nlohmann::json;
  return std::visit(
      [](const auto& e) -> json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ev::PostCreated>) return {{"post", e.post}};
        else if constexpr (std::is_same_v<T, ev::PostDeleted>) return {{"postId", e.post_id}};
        else if constexpr (std::is_same_v<T, ev::CommentCreated>) return {{"comment", e.comment}};
        else if constexpr (std::is_same_v<T, ev::CommentDeleted>) return {{"commentId", e.comment_id}};
        else if constexpr (std::is_same_v<T, ev::ReactionAdded>)
          return {{"postId", e.post_id}, {"author", e.author}, {"kind", "Like"}};
        else if constexpr (std::is_same_v<T, ev::DmSent>) return {{"message", e.message}};
        else if constexpr (std::is_same_v<T, ev::ChecklistItemCompleted>) return {{"itemId", e.item_id}};
        else if constexpr (std::is_same_v<T, ev::ToxicityChanged>)
          return {{"old", e.old_value}, {"new", e.new_value}, {"cause", std::string(to_string(e.cause))}};
        else if constexpr (std::is_same_v<T, ev::HintIssued>) return {{"hintId", e.hint_id}, {"index", e.index}};
        else if constexpr (std::is_same_v<T, ev::ScenarioStarted>) return setup_json(e.setup);
        else if constexpr (std::is_same_v<T, ev::ScenarioRestarted>) return setup_json(e.setup);
        else if constexpr (std::is_same_v<T, ev::ScenarioConcluded>)
          return {{"reason", std::string(to_string(e.reason))}};
        else if constexpr (std::is_same_v<T, ev::TriggerFired>) return {{"ruleId", e.rule_id}, {"actor", e.actor}};
        else if constexpr (std::is_same_v<T, ev::JudgeVerdictRecorded>) {
          json sources = json::object();
          for (const auto& [k, v] : e.sources) sources[k] = std::string(to_string(v));
          json j{{"messageId", e.message_id}, {"assignment", e.assignment}, {"sources", sources}};
          if (!e.rationale.empty()) j["rationale"] = e.rationale;
          return j;
        } else return json::object();
      },
      body);
}

inline nlohmann::json event_json(const SessionEvent& e) {
  return {{"seq", e.seq}, {"at", e.at.count()}, {"kind", std::string(e.kind())}, {"payload", payload_json(e.body)}};
}

inline EventBody body_from_json(std::string_view kind, const nlohmann::json& p) {
  if (kind == "PostCreated") return ev::PostCreated{p.at("post").get<FeedPost>()};
  if (kind == "PostDeleted") return ev::PostDeleted{p.at("postId").get<PostId>()};
  if (kind == "CommentCreated") return ev::CommentCreated{p.at("comment").get<Comment>()};
  if (kind == "CommentDeleted") return ev::CommentDeleted{p.at("commentId").get<CommentId>()};
  if (kind == "ReactionAdded") return ev::ReactionAdded{p.at("postId").get<PostId>(), p.at("author").get<Party>()};
  if (kind == "DmSent") return ev::DmSent{p.at("message").get<DirectMessage>()};
  if (kind == "ChecklistItemCompleted") return ev::ChecklistItemCompleted{p.at("itemId").get<std::string>()};
  if (kind == "ToxicityChanged")
    return ev::ToxicityChanged{p.at("old").get<int>(), p.at("new").get<int>(),
                               parse_enum(p.at("cause").get<std::string>(), kAllCauses, "toxicity cause")};
  if (kind == "HintIssued") return ev::HintIssued{p.at("hintId").get<std::string>(), p.at("index").get<std::size_t>()};
  if (kind == "ScenarioStarted") return ev::ScenarioStarted{setup_from_json(p)};
  if (kind == "ScenarioRestarted") return ev::ScenarioRestarted{setup_from_json(p)};
  if (kind == "ScenarioConcluded")
    return ev::ScenarioConcluded{parse_enum(p.at("reason").get<std::string>(), kAllReasons, "conclusion reason")};
  if (kind == "TriggerFired") return ev::TriggerFired{p.at("ruleId").get<std::string>(), p.at("actor").get<ActorId>()};
  if (kind == "JudgeVerdictRecorded") {
    ev::JudgeVerdictRecorded v;
    v.message_id = p.at("messageId").get<std::string>();
    v.assignment = p.at("assignment").get<PredicateAssignment>();
    for (const auto& [k, s] : p.at("sources").items())
      v.sources.emplace(k, parse_enum(s.get<std::string>(), kAllSources, "verdict source"));
    if (p.contains("rationale")) v.rationale = p.at("rationale").get<std::map<std::string, std::string>>();
    return v;
  }
  if (kind == "SessionFinished") return ev::SessionFinished{};
  fail(ErrorCode::MalformedDocument, "unknown event kind '" + std::string(kind) + "'");
}

inline SessionEvent event_from_json(const nlohmann::json& j) {
  try {
    SessionEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.at = SimTime{j.at("at").get<std::int64_t>()};
    e.body = body_from_json(j.at("kind").get<std::string>(), j.at("payload"));
    return e;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::MalformedDocument, std::string("malformed event record: ") + ex.what());
  }
}

}  // namespace feedsim
