#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "feedsim/error.hpp"
#include "feedsim/events.hpp"
#include "feedsim/expression.hpp"
#include "feedsim/pack.hpp"
#include "feedsim/reducer.hpp"
#include "feedsim/sha256.hpp"
#include "feedsim/validate.hpp"

namespace feedsim {

inline constexpr int kSessionHintBudget = 3;

/// Where a participant message goes.
struct Route {
  enum class Kind { PublicComment, Dm };
  Kind kind = Kind::PublicComment;
  PostId post_id;   // PublicComment
  ActorId actor_id;  // Dm

  static Route public_comment(PostId post) { return {Kind::PublicComment, std::move(post), {}}; }
  static Route dm(ActorId actor) { return {Kind::Dm, {}, std::move(actor)}; }
  bool is_dm() const { return kind == Kind::Dm; }
};

/// A DM to X is judged on predicates that apply to messages to X or to any
/// message. A public comment is judged on every predicate.
inline bool predicate_applies(const PredicateDef& p, const Route& route) {
  if (!route.is_dm()) return true;
  switch (p.applies_to.kind) {
    case AppliesTo::Kind::Any: return true;
    case AppliesTo::Kind::PublicComment: return false;
    case AppliesTo::Kind::MessageToActor: return p.applies_to.actor == route.actor_id;
  }
  return false;
}

inline std::vector<const PredicateDef*> predicates_for_route(const ScenarioSpec& s, const Route& route) {
  std::vector<const PredicateDef*> out;
  for (const auto& p : s.predicates)
    if (predicate_applies(p, route)) out.push_back(&p);
  return out;
}

inline bool rule_applies(const TriggerRuleSpec& r, const Route& route) {
  return !route.is_dm() || r.target_actor == route.actor_id;
}

// ---- trigger evaluation ------------------------------------------------------

/// Rules that target the route, are not blocked by onceOnly, and whose
/// condition holds. Declaration order is kept. Every identifier a candidate
/// rule references must be present in `assignment`.
inline std::vector<const TriggerRuleSpec*> evaluate_triggers(const std::vector<TriggerRuleSpec>& rules,
                                                             const PredicateAssignment& assignment,
                                                             const std::set<std::string>& fired, const Route& route) {
  std::vector<const TriggerRuleSpec*> out;
  for (const auto& rule : rules) {
    if (!rule_applies(rule, route)) continue;
    if (rule.once_only && fired.contains(rule.rule_id)) continue;
    const auto expr = Expression::parse(rule.condition);
    const bool holds = expr.evaluate([&](const std::string& name) {
      auto it = assignment.find(name);
      if (it == assignment.end())
        fail(ErrorCode::UnknownPredicate, "assignment lacks predicate '" + name + "' used by rule '" + rule.rule_id + "'",
             {{"predicate", name}, {"rule", rule.rule_id}});
      return it->second;
    });
    if (holds) out.push_back(&rule);
  }
  return out;
}

/// Scenario-aware variant: a rule whose condition mentions a predicate that is
/// not judged on this route cannot fire from this message and is skipped.
inline std::vector<const TriggerRuleSpec*> evaluate_triggers(const ScenarioSpec& scenario,
                                                             const PredicateAssignment& assignment,
                                                             const std::set<std::string>& fired, const Route& route) {
  std::set<std::string> in_route;
  for (const auto* p : predicates_for_route(scenario, route)) in_route.insert(p->name);
  std::vector<TriggerRuleSpec> candidates;
  std::vector<const TriggerRuleSpec*> origin;
  for (const auto& rule : scenario.trigger_rules) {
    const auto ids = Expression::parse(rule.condition).identifiers();
    if (std::all_of(ids.begin(), ids.end(), [&](const std::string& n) { return in_route.contains(n); })) {
      candidates.push_back(rule);
      origin.push_back(&rule);
    }
  }
  auto picked = evaluate_triggers(candidates, assignment, fired, route);
  std::vector<const TriggerRuleSpec*> out;
  for (const auto* r : picked) out.push_back(origin[static_cast<std::size_t>(r - candidates.data())]);
  return out;
}

// ---- runtime -----------------------------------------------------------------

struct ScenarioRuntime {
  std::string scenario_id;
  std::size_t index = 0;
  bool is_transfer = false;
  int toxicity = 0;
  std::vector<std::string> checklist_order;
  std::map<std::string, bool> checklist;
  std::set<std::string> fired_rules;
  std::set<std::string> true_predicates;  // recorded true at least once this run
  SimTime started_at{0};
  SimTime deadline_at{0};
  std::optional<ConclusionReason> conclusion;
  unsigned run = 0;  // 1 for the first run, +1 per restart

  bool running() const { return run > 0 && !conclusion.has_value(); }

  friend bool operator==(const ScenarioRuntime&, const ScenarioRuntime&) = default;
};

/// Everything a session log determines. Equal logs give equal states.
struct SessionState {
  FeedState feed;
  ScenarioRuntime runtime;
  int hints_used = 0;                              // session-global
  std::map<std::string, std::size_t> hints_disclosed;  // per scenario, survives restarts
  bool finished = false;

  std::uint64_t last_seq() const { return feed.last_seq; }

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

inline ScenarioSetup make_setup(const ScenarioSpec& s, std::size_t index, SimTime now) {
  ScenarioSetup setup;
  setup.scenario_id = s.id;
  setup.index = index;
  setup.is_transfer = s.is_transfer;
  setup.actors = scenario_actors(s);
  setup.posts = s.initial_posts;
  setup.comments = s.initial_comments;
  // Seeded createdAt values are offsets from the scenario start.
  for (auto& p : setup.posts) p.created_at += now, p.created_seq = 0, p.deleted = false;
  for (auto& c : setup.comments) c.created_at += now, c.created_seq = 0, c.deleted = false;
  setup.toxicity = s.toxicity.start_value;
  for (const auto& item : s.checklist) setup.checklist.push_back(item.item_id);
  setup.deadline_at = now + std::chrono::seconds(s.time_limit_seconds);
  return setup;
}

namespace detail {

inline void require_running(const ScenarioRuntime& r, std::string_view what) {
  if (!r.running()) fail(ErrorCode::ScenarioNotRunning, std::string(what) + " requires a running scenario");
}

inline ScenarioRuntime runtime_from_setup(const ScenarioSetup& s, SimTime at, unsigned run) {
  ScenarioRuntime r;
  r.scenario_id = s.scenario_id;
  r.index = s.index;
  r.is_transfer = s.is_transfer;
  r.toxicity = s.toxicity;
  r.checklist_order = s.checklist;
  for (const auto& id : s.checklist) r.checklist.emplace(id, false);
  r.started_at = at;
  r.deadline_at = s.deadline_at;
  r.run = run;
  return r;
}

struct RuntimeReducer {
  SessionState& s;
  const SessionEvent& e;

  void operator()(const ev::ScenarioStarted& x) {
    if (s.finished) fail(ErrorCode::SessionFinished, "session already finished");
    s.runtime = runtime_from_setup(x.setup, e.at, 1);
  }
  void operator()(const ev::ScenarioRestarted& x) {
    if (x.setup.scenario_id != s.runtime.scenario_id)
      fail(ErrorCode::DanglingReference, "restart of '" + x.setup.scenario_id + "' while '" +
                                             s.runtime.scenario_id + "' is current");
    if (s.runtime.conclusion == ConclusionReason::Cleared)
      fail(ErrorCode::CannotRestartCleared, "scenario was cleared");
    s.runtime = runtime_from_setup(x.setup, e.at, s.runtime.run + 1);
  }
  void operator()(const ev::ChecklistItemCompleted& x) {
    require_running(s.runtime, "ChecklistItemCompleted");
    auto it = s.runtime.checklist.find(x.item_id);
    if (it == s.runtime.checklist.end()) fail(ErrorCode::DanglingReference, "unknown checklist item '" + x.item_id + "'");
    if (it->second) fail(ErrorCode::DuplicateId, "checklist item '" + x.item_id + "' already done");
    it->second = true;
  }
  void operator()(const ev::ToxicityChanged& x) {
    require_running(s.runtime, "ToxicityChanged");
    if (x.old_value != s.runtime.toxicity)
      fail(ErrorCode::Internal, "toxicity change from " + std::to_string(x.old_value) + " but current is " +
                                    std::to_string(s.runtime.toxicity));
    s.runtime.toxicity = x.new_value;
  }
  void operator()(const ev::HintIssued&) {
    require_running(s.runtime, "HintIssued");
    if (s.runtime.is_transfer) fail(ErrorCode::TransferScenario, "no hints in transfer scenarios");
    if (s.hints_used >= kSessionHintBudget) fail(ErrorCode::HintBudgetExhausted, "hint budget exhausted");
    ++s.hints_used;
    ++s.hints_disclosed[s.runtime.scenario_id];
  }
  void operator()(const ev::ScenarioConcluded& x) {
    require_running(s.runtime, "ScenarioConcluded");
    s.runtime.conclusion = x.reason;
  }
  void operator()(const ev::TriggerFired& x) {
    require_running(s.runtime, "TriggerFired");
    s.runtime.fired_rules.insert(x.rule_id);
  }
  void operator()(const ev::JudgeVerdictRecorded& x) {
    for (const auto& [name, value] : x.assignment)
      if (value) s.runtime.true_predicates.insert(name);
  }
  void operator()(const ev::SessionFinished&) {
    if (s.finished) fail(ErrorCode::SessionFinished, "session already finished");
    if (s.runtime.running()) fail(ErrorCode::ScenarioStillRunning, "current scenario still running");
    s.finished = true;
  }
  template <typename T>
  void operator()(const T&) {}
};

}  // namespace detail

/// Combined pure reducer over feed content and scenario runtime.
inline SessionState apply_event(const SessionState& state, const SessionEvent& e) {
  SessionState next;
  next.feed = apply_event(state.feed, e);
  next.runtime = state.runtime;
  next.hints_used = state.hints_used;
  next.hints_disclosed = state.hints_disclosed;
  next.finished = state.finished;
  std::visit(detail::RuntimeReducer{next, e}, e.body);
  return next;
}

/// In-place variant used by the pipeline; leaves `state` unspecified on throw.
inline void apply_event_in_place(SessionState& state, const SessionEvent& e) {
  if (e.seq != state.feed.last_seq + 1)
    fail(ErrorCode::SequenceGap,
         "expected seq " + std::to_string(state.feed.last_seq + 1) + ", got " + std::to_string(e.seq),
         {{"expected", state.feed.last_seq + 1}, {"got", e.seq}});
  std::visit(detail::FeedReducer{state.feed, e}, e.body);
  state.feed.last_seq = e.seq;
  std::visit(detail::RuntimeReducer{state, e}, e.body);
}

inline SessionState replay_events(const std::vector<SessionEvent>& events, std::vector<Participant> participants) {
  SessionState s;
  for (const auto& p : participants) s.feed.participants.emplace(p.id, p);
  for (const auto& e : events) apply_event_in_place(s, e);
  return s;
}

inline nlohmann::json runtime_json(const ScenarioRuntime& r) {
  nlohmann::json checklist = nlohmann::json::array();
  for (const auto& id : r.checklist_order) checklist.push_back({{"itemId", id}, {"done", r.checklist.at(id)}});
  nlohmann::json j{{"scenarioId", r.scenario_id},   {"index", r.index},
                   {"isTransfer", r.is_transfer},   {"toxicity", r.toxicity},
                   {"checklist", checklist},        {"firedRules", r.fired_rules},
                   {"truePredicates", r.true_predicates}, {"startedAt", r.started_at.count()},
                   {"deadlineAt", r.deadline_at.count()}, {"run", r.run}};
  j["conclusion"] = r.conclusion ? nlohmann::json(std::string(to_string(*r.conclusion))) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json canonical_json(const SessionState& s) {
  return {{"feed", canonical_json(s.feed)},
          {"runtime", runtime_json(s.runtime)},
          {"hintsUsed", s.hints_used},
          {"hintsDisclosed", s.hints_disclosed},
          {"finished", s.finished}};
}

/// "sha256:<hex>" over the canonical serialization.
inline std::string state_hash(const SessionState& s) { return "sha256:" + sha256_hex(canonical_json(s).dump()); }

// ---- engine operations -------------------------------------------------------

inline int toxicity_delta(const ToxicityConfig& cfg, ToxicityCause cause) {
  switch (cause) {
    case ToxicityCause::ChecklistItem: return cfg.checklist_delta;
    case ToxicityCause::Rally: return cfg.rally_delta;
    case ToxicityCause::Escalation: return cfg.escalation_delta;
  }
  return 0;
}

inline ev::ToxicityChanged apply_toxicity(const ScenarioRuntime& r, const ToxicityConfig& cfg, ToxicityCause cause) {
  detail::require_running(r, "apply_toxicity");
  const int next = std::clamp(r.toxicity + toxicity_delta(cfg, cause), cfg.floor, cfg.ceiling);
  return {r.toxicity, next, cause};
}

inline std::optional<ConclusionReason> conclusion_check(const ScenarioRuntime& r, const ToxicityConfig& cfg) {
  if (r.toxicity <= cfg.floor) return ConclusionReason::Cleared;
  if (r.toxicity >= cfg.fail_threshold) return ConclusionReason::Escalated;
  return std::nullopt;
}

/// Timeout when `now` has reached the deadline (inclusive).
inline std::optional<ev::ScenarioConcluded> tick(const ScenarioRuntime& r, SimTime now) {
  if (r.running() && now >= r.deadline_at) return ev::ScenarioConcluded{ConclusionReason::Timeout};
  return std::nullopt;
}

/// Checklist items whose completion now holds and that are not yet done, in
/// declaration order. Names resolve to "predicate recorded true this run" or
/// "rule fired this run".
inline std::vector<std::string> mark_checklist(const ScenarioRuntime& r, const ScenarioSpec& spec) {
  std::vector<std::string> out;
  if (!r.running()) return out;
  for (const auto& item : spec.checklist) {
    auto it = r.checklist.find(item.item_id);
    if (it == r.checklist.end() || it->second) continue;
    const bool done = Expression::parse(item.completion).evaluate([&](const std::string& n) {
      return r.true_predicates.contains(n) || r.fired_rules.contains(n);
    });
    if (done) out.push_back(item.item_id);
  }
  return out;
}

struct HintGrant {
  ev::HintIssued event;
  std::string text;
};

inline HintGrant request_hint(const SessionState& s, const ScenarioSpec& spec) {
  const auto& r = s.runtime;
  if (!r.running()) fail(ErrorCode::ScenarioNotRunning, "scenario '" + r.scenario_id + "' is not running");
  if (r.is_transfer) fail(ErrorCode::TransferScenario, "hints are not available in transfer scenarios");
  if (s.hints_used >= kSessionHintBudget)
    fail(ErrorCode::HintBudgetExhausted, "all " + std::to_string(kSessionHintBudget) + " hints have been used",
         {{"budget", kSessionHintBudget}});
  auto it = s.hints_disclosed.find(r.scenario_id);
  const std::size_t n = it == s.hints_disclosed.end() ? 0 : it->second;
  if (n >= spec.hints.size()) fail(ErrorCode::NoMoreHints, "no more hints for scenario '" + r.scenario_id + "'");
  return {ev::HintIssued{r.scenario_id + "/hint-" + std::to_string(n + 1), n}, spec.hints[n]};
}

inline void check_restartable(const ScenarioRuntime& r) {
  if (r.conclusion == ConclusionReason::Cleared)
    fail(ErrorCode::CannotRestartCleared, "a cleared scenario cannot be restarted");
  if (r.conclusion == ConclusionReason::ManualAdvance)
    fail(ErrorCode::ScenarioConcluded, "scenario was concluded by the facilitator");
  if (r.run == 0) fail(ErrorCode::ScenarioNotRunning, "no scenario has started");
}

/// Expressions and regexes of one scenario, compiled once. Construction fails
/// with PackInvalid on any reference the engine could not resolve.
class CompiledScenario {
 public:
  explicit CompiledScenario(const ScenarioSpec& spec) : spec_(&spec) {
    std::set<std::string> predicates, rules;
    for (const auto& p : spec.predicates) {
      predicates.insert(p.name);
      auto& res = regexes_[p.name];
      for (const auto& pat : p.patterns) {
        try {
          res.push_back(compile_pattern(pat));
        } catch (const std::regex_error& e) {
          fail(ErrorCode::PackInvalid, "predicate '" + p.name + "': bad pattern: " + e.what());
        }
      }
    }
    for (const auto& r : spec.trigger_rules) {
      rules.insert(r.rule_id);
      if (!spec.find_actor(r.target_actor)) fail(ErrorCode::PackInvalid, "rule '" + r.rule_id + "': unknown actor");
      auto expr = Expression::parse(r.condition);
      for (const auto& n : expr.identifiers())
        if (!predicates.contains(n)) fail(ErrorCode::PackInvalid, "rule '" + r.rule_id + "': undefined predicate '" + n + "'");
      for (const auto& a : r.actions) check_action(spec, a);
    }
    for (const auto& c : spec.checklist) {
      auto expr = Expression::parse(c.completion);
      for (const auto& n : expr.identifiers())
        if (!predicates.contains(n) && !rules.contains(n))
          fail(ErrorCode::PackInvalid, "checklist '" + c.item_id + "': undefined name '" + n + "'");
    }
  }

  const ScenarioSpec& spec() const { return *spec_; }
  const std::vector<std::regex>& patterns(const std::string& predicate) const { return regexes_.at(predicate); }

 private:
  void check_action(const ScenarioSpec& spec, const TriggerAction& a) {
    if (a.kind == ActionKind::EscalateNewPost) {
      if (!spec.templates.contains(a.body_template_ref))
        fail(ErrorCode::PackInvalid, "unknown template '" + a.body_template_ref + "'");
      if (!a.post_id.empty()) aliases_.insert(a.post_id);
    }
    if (a.kind == ActionKind::DeletePost || a.kind == ActionKind::PublicApologyComment ||
        a.kind == ActionKind::PostSupportiveComment) {
      bool seeded = std::any_of(spec.initial_posts.begin(), spec.initial_posts.end(),
                                [&](const FeedPost& p) { return p.id.value == a.post_ref; });
      if (!seeded && !aliases_.contains(a.post_ref)) fail(ErrorCode::PackInvalid, "unknown postRef '" + a.post_ref + "'");
    }
  }

  const ScenarioSpec* spec_;
  std::map<std::string, std::vector<std::regex>> regexes_;
  std::set<std::string> aliases_;
};

}  // namespace feedsim
