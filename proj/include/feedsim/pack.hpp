#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "feedsim/model.hpp"

namespace feedsim {

/// Integer toxicity scale. Deltas are absolute points, applied then clamped
/// to [floor, ceiling].
struct ToxicityConfig {
  int start_value = 100;
  int checklist_delta = -30;
  int rally_delta = -10;
  int escalation_delta = 50;
  int floor = 0;
  int ceiling = 200;
  int fail_threshold = 150;

  friend bool operator==(const ToxicityConfig&, const ToxicityConfig&) = default;
};

enum class JudgeMode { Scripted, LlmJudge };
enum class ScenarioType { IntentionalHazing, Cyberstalking, RecklessDoxxing, IntentionalDoxxing };

inline std::string_view to_string(JudgeMode m) { return m == JudgeMode::Scripted ? "Scripted" : "LlmJudge"; }

inline std::string_view to_string(ScenarioType t) {
  switch (t) {
    case ScenarioType::IntentionalHazing: return "IntentionalHazing";
    case ScenarioType::Cyberstalking: return "Cyberstalking";
    case ScenarioType::RecklessDoxxing: return "RecklessDoxxing";
    case ScenarioType::IntentionalDoxxing: return "IntentionalDoxxing";
  }
  return "RecklessDoxxing";
}

struct AppliesTo {
  enum class Kind { MessageToActor, PublicComment, Any };
  Kind kind = Kind::Any;
  ActorId actor;  // only for MessageToActor

  friend bool operator==(const AppliesTo&, const AppliesTo&) = default;
};

inline std::string_view to_string(AppliesTo::Kind k) {
  switch (k) {
    case AppliesTo::Kind::MessageToActor: return "MessageToActor";
    case AppliesTo::Kind::PublicComment: return "PublicComment";
    case AppliesTo::Kind::Any: return "Any";
  }
  return "Any";
}

struct PredicateDef {
  std::string name;
  std::string criterion;              // natural-language text for the model judge
  std::vector<std::string> patterns;  // case-insensitive POSIX ERE for the scripted judge
  AppliesTo applies_to;

  friend bool operator==(const PredicateDef&, const PredicateDef&) = default;
};

enum class ActionKind {
  DeletePost,
  PublicApologyComment,
  EscalateNewPost,
  DmParticipant,
  PostSupportiveComment,
  DmThanks,
  DmFrustration,
};

inline std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::DeletePost: return "DeletePost";
    case ActionKind::PublicApologyComment: return "PublicApologyComment";
    case ActionKind::EscalateNewPost: return "EscalateNewPost";
    case ActionKind::DmParticipant: return "DmParticipant";
    case ActionKind::PostSupportiveComment: return "PostSupportiveComment";
    case ActionKind::DmThanks: return "DmThanks";
    case ActionKind::DmFrustration: return "DmFrustration";
  }
  return "DeletePost";
}

inline std::optional<ActionKind> action_kind_from_string(std::string_view s) {
  for (ActionKind k : {ActionKind::DeletePost, ActionKind::PublicApologyComment, ActionKind::EscalateNewPost,
                       ActionKind::DmParticipant, ActionKind::PostSupportiveComment, ActionKind::DmThanks,
                       ActionKind::DmFrustration}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// Which fields are meaningful depends on kind:
///   DeletePost / PublicApologyComment / PostSupportiveComment: post_ref
///   EscalateNewPost: body_template_ref, flagged_spans, optional post_id alias and image_ref
///   DmParticipant: tone_ref
struct TriggerAction {
  ActionKind kind = ActionKind::DeletePost;
  std::string post_ref;
  std::string body_template_ref;
  std::vector<FlaggedSpan> flagged_spans;
  std::string tone_ref;
  std::string post_id;
  std::string image_ref;

  friend bool operator==(const TriggerAction&, const TriggerAction&) = default;
};

struct TriggerRuleSpec {
  std::string rule_id;
  ActorId target_actor;
  std::string condition;
  bool once_only = true;
  std::vector<TriggerAction> actions;

  friend bool operator==(const TriggerRuleSpec&, const TriggerRuleSpec&) = default;
};

struct ChecklistItemSpec {
  std::string item_id;
  std::string label;
  std::string completion;  // expression over predicate names and rule ids

  friend bool operator==(const ChecklistItemSpec&, const ChecklistItemSpec&) = default;
};

struct ActorSpec {
  Actor actor;
  std::map<std::string, std::string> scripted_replies;  // reply key -> canned line

  friend bool operator==(const ActorSpec&, const ActorSpec&) = default;
};

struct ScenarioSpec {
  std::string id;
  std::string title;
  int level = 1;
  ScenarioType scenario_type = ScenarioType::RecklessDoxxing;
  bool is_transfer = false;
  std::vector<ActorSpec> actors;
  std::vector<FeedPost> initial_posts;
  std::vector<Comment> initial_comments;
  std::vector<PredicateDef> predicates;
  std::map<std::string, std::string> templates;
  std::vector<TriggerRuleSpec> trigger_rules;
  std::vector<ChecklistItemSpec> checklist;
  std::vector<std::string> hints;
  int time_limit_seconds = 480;
  ToxicityConfig toxicity;
  std::string reflection_text;

  const ActorSpec* find_actor(const ActorId& id) const {
    for (const auto& a : actors)
      if (a.actor.id == id) return &a;
    return nullptr;
  }
  const ActorSpec* find_actor_by_role(Role role) const {
    for (const auto& a : actors)
      if (a.actor.role == role) return &a;
    return nullptr;
  }
  const PredicateDef* find_predicate(std::string_view name) const {
    for (const auto& p : predicates)
      if (p.name == name) return &p;
    return nullptr;
  }
  const TriggerRuleSpec* find_rule(std::string_view id) const {
    for (const auto& r : trigger_rules)
      if (r.rule_id == id) return &r;
    return nullptr;
  }

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct ScenarioPack {
  std::string pack_id;
  std::string version;
  JudgeMode judge_mode = JudgeMode::Scripted;
  ToxicityConfig defaults;
  std::vector<ScenarioSpec> scenarios;

  const ScenarioSpec* find_scenario(std::string_view id) const {
    for (const auto& s : scenarios)
      if (s.id == id) return &s;
    return nullptr;
  }

  friend bool operator==(const ScenarioPack&, const ScenarioPack&) = default;
};

}  // namespace feedsim
