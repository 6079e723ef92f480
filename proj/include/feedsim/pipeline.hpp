#pragma once

#include <optional>
#include <string>
#include <vector>

#include "feedsim/agent.hpp"
#include "feedsim/engine.hpp"
#include "feedsim/error.hpp"
#include "feedsim/events.hpp"
#include "feedsim/pack.hpp"

namespace feedsim {

/// Events staged against a private copy of the state. Nothing is visible to
/// anyone until the owner commits `events()` and `state()` together.
class Transaction {
 public:
  Transaction(const SessionState& base, SimTime now) : state_(base), now_(now) {}

  const SessionEvent& emit(EventBody body) {
    SessionEvent e{state_.last_seq() + 1, now_, std::move(body)};
    apply_event_in_place(state_, e);
    events_.push_back(std::move(e));
    return events_.back();
  }

  std::uint64_t next_seq() const { return state_.last_seq() + 1; }
  const SessionState& state() const { return state_; }
  const std::vector<SessionEvent>& events() const { return events_; }
  SimTime now() const { return now_; }

 private:
  SessionState state_;
  SimTime now_;
  std::vector<SessionEvent> events_;
};

/// Immutable per-session inputs to the pipeline.
struct PipelineContext {
  const ScenarioPack* pack = nullptr;
  const std::vector<CompiledScenario>* compiled = nullptr;  // parallel to pack->scenarios
  std::vector<std::size_t> order;                           // pack scenario indices played in this session
  ChatBackend* backend = nullptr;
  const PromptTemplate* prompt = nullptr;
  JudgeMode judge_mode = JudgeMode::Scripted;
  std::size_t max_context = kDefaultMaxContextEvents;

  const ScenarioSpec& scenario_at(std::size_t session_index) const { return pack->scenarios.at(order.at(session_index)); }
  const CompiledScenario& compiled_at(std::size_t session_index) const { return compiled->at(order.at(session_index)); }
};

inline std::string reply_instruction(std::string_view key) {
  if (key == "apology") return "Write a short public comment under your post apologizing for it.";
  if (key == "supportive") return "Write a short public comment under the post supporting the people speaking up.";
  if (key == "thanks") return "Send a short DM thanking me for speaking up.";
  if (key == "frustration") return "Send a short DM telling me how frustrated you are that things got worse.";
  if (key == "default" || key.empty()) return {};
  return "Send a short DM to me. Tone: " + std::string(key) + ".";
}

namespace detail {

inline bool live_post(const FeedState& s, const std::string& id) {
  auto it = s.posts.find(PostId{id});
  return it != s.posts.end() && !it->second.deleted;
}

struct ActionOutcome {
  std::optional<ToxicityCause> cause;
  bool dm_to_participant = false;
};

inline ActionOutcome run_action(const PipelineContext& ctx, Transaction& tx, const TriggerRuleSpec& rule,
                                const TriggerAction& a, const ParticipantId& participant) {
  const auto& spec = ctx.scenario_at(tx.state().runtime.index);
  const Party actor = Party::actor(rule.target_actor);
  const std::string& participant_name = tx.state().feed.participants.at(participant).display_name;
  auto reply = [&](const std::string& key) {
    return generate_reply(*ctx.backend, *ctx.prompt, tx.state().feed,
                          {rule.target_actor, participant, key, reply_instruction(key)}, ctx.max_context);
  };
  auto dm = [&](const std::string& key) {
    std::string body = reply(key);
    const std::uint64_t seq = tx.next_seq();
    tx.emit(ev::DmSent{{MessageId{"m-" + std::to_string(seq)}, actor, Party::participant(participant), std::move(body),
                        tx.now(), seq}});
  };
  auto comment = [&](const std::string& post, const std::string& key) {
    std::string body = reply(key);
    const std::uint64_t seq = tx.next_seq();
    tx.emit(ev::CommentCreated{{CommentId{"c-" + std::to_string(seq)}, PostId{post}, actor, std::move(body), tx.now(), seq, false}});
  };

  ActionOutcome out;
  switch (a.kind) {
    case ActionKind::DeletePost:
      if (live_post(tx.state().feed, a.post_ref)) tx.emit(ev::PostDeleted{PostId{a.post_ref}});
      break;
    case ActionKind::PublicApologyComment:
      if (live_post(tx.state().feed, a.post_ref)) comment(a.post_ref, "apology");
      break;
    case ActionKind::PostSupportiveComment:
      if (live_post(tx.state().feed, a.post_ref)) {
        comment(a.post_ref, "supportive");
        out.cause = ToxicityCause::Rally;
      }
      break;
    case ActionKind::EscalateNewPost: {
      const std::uint64_t seq = tx.next_seq();
      const std::string id = a.post_id.empty() ? "post-" + std::to_string(seq) : a.post_id;
      const auto& feed = tx.state().feed;
      if (feed.posts.contains(PostId{id}) || feed.comments.contains(CommentId{id})) break;
      FeedPost post;
      post.id = PostId{id};
      post.author = actor;
      post.body = fill_participant(spec.templates.at(a.body_template_ref), participant_name);
      if (!a.image_ref.empty()) post.image_ref = a.image_ref;
      post.flagged_spans = a.flagged_spans;
      post.created_at = tx.now();
      post.created_seq = seq;
      tx.emit(ev::PostCreated{std::move(post)});
      out.cause = ToxicityCause::Escalation;
      break;
    }
    case ActionKind::DmParticipant:
      dm(a.tone_ref);
      out.dm_to_participant = true;
      break;
    case ActionKind::DmThanks:
      dm("thanks");
      out.dm_to_participant = true;
      break;
    case ActionKind::DmFrustration:
      dm("frustration");
      out.dm_to_participant = true;
      break;
  }
  return out;
}

inline void emit_checklist(Transaction& tx, const ScenarioSpec& spec, std::vector<ToxicityCause>& causes) {
  for (const auto& item : mark_checklist(tx.state().runtime, spec)) {
    tx.emit(ev::ChecklistItemCompleted{item});
    causes.push_back(ToxicityCause::ChecklistItem);
  }
}

}  // namespace detail

/// Roll the clock forward; concludes with Timeout at or past the deadline.
/// Fold causes into toxicity in order, concluding as soon as a bound is hit.
/// Causes after the conclusion are dropped.
inline void apply_causes(Transaction& tx, const ToxicityConfig& cfg, const std::vector<ToxicityCause>& causes) {
  for (ToxicityCause cause : causes) {
    if (!tx.state().runtime.running()) break;
    tx.emit(apply_toxicity(tx.state().runtime, cfg, cause));
    if (auto reason = conclusion_check(tx.state().runtime, cfg)) tx.emit(ev::ScenarioConcluded{*reason});
  }
}

inline bool apply_tick(Transaction& tx) {
  if (auto c = tick(tx.state().runtime, tx.now())) {
    tx.emit(*c);
    return true;
  }
  return false;
}

inline void require_playable(const SessionState& s) {
  if (s.finished) fail(ErrorCode::SessionFinished, "session has finished");
  if (!s.runtime.running())
    fail(ErrorCode::ScenarioConcluded, "scenario '" + s.runtime.scenario_id + "' has concluded",
         {{"reason", s.runtime.conclusion ? std::string(to_string(*s.runtime.conclusion)) : "NotStarted"}});
}

/// Participant message pipeline, in order:
///   participant event; judge verdict; checklist; fired rules with their
///   actions; checklist again; toxicity deltas (checklist items found before
///   the rules, then per action, then items found after), each followed by a
///   conclusion check; a reactive DM reply when the route was a DM and no rule
///   made the recipient DM the participant.
inline void submit_message(const PipelineContext& ctx, Transaction& tx, const ParticipantId& participant,
                           const Route& route, const std::string& body) {
  const SessionState& s0 = tx.state();
  require_playable(s0);
  if (!s0.feed.participants.contains(participant))
    fail(ErrorCode::UnknownParticipant, "unknown participant '" + participant.value + "'");
  if (is_blank(body)) fail(ErrorCode::EmptyBody, "message body is empty");
  if (route.is_dm() && !s0.feed.actors.contains(route.actor_id))
    fail(ErrorCode::UnknownTarget, "unknown actor '" + route.actor_id.value + "'", {{"actorId", route.actor_id}});
  if (!route.is_dm() && !detail::live_post(s0.feed, route.post_id.value))
    fail(ErrorCode::UnknownTarget, "unknown or deleted post '" + route.post_id.value + "'", {{"postId", route.post_id}});

  const std::size_t index = s0.runtime.index;
  const auto& spec = ctx.scenario_at(index);
  const auto& compiled = ctx.compiled_at(index);
  const Party me = Party::participant(participant);

  // participant event
  const std::uint64_t seq = tx.next_seq();
  std::string message_id;
  if (route.is_dm()) {
    message_id = "m-" + std::to_string(seq);
    tx.emit(ev::DmSent{{MessageId{message_id}, me, Party::actor(route.actor_id), body, tx.now(), seq}});
  } else {
    message_id = "c-" + std::to_string(seq);
    tx.emit(ev::CommentCreated{{CommentId{message_id}, route.post_id, me, body, tx.now(), seq, false}});
  }

  // verdict, recorded before any use
  auto verdict = judge_message(*ctx.backend, ctx.judge_mode, compiled, message_id, body, route);
  const PredicateAssignment assignment = verdict.assignment;
  tx.emit(std::move(verdict));

  // checklist
  std::vector<ToxicityCause> pre, actions, post;
  detail::emit_checklist(tx, spec, pre);

  // triggers and actions
  bool replied = false;
  const auto fired = evaluate_triggers(spec, assignment, tx.state().runtime.fired_rules, route);
  std::string last_rule_for_target;
  for (const auto* rule : fired) {
    tx.emit(ev::TriggerFired{rule->rule_id, rule->target_actor});
    if (route.is_dm() && rule->target_actor == route.actor_id) last_rule_for_target = rule->rule_id;
    for (const auto& a : rule->actions) {
      auto outcome = detail::run_action(ctx, tx, *rule, a, participant);
      if (outcome.cause) actions.push_back(*outcome.cause);
      if (outcome.dm_to_participant && route.is_dm() && rule->target_actor == route.actor_id) replied = true;
    }
  }
  detail::emit_checklist(tx, spec, post);

  // toxicity and conclusion
  std::vector<ToxicityCause> causes = pre;
  causes.insert(causes.end(), actions.begin(), actions.end());
  causes.insert(causes.end(), post.begin(), post.end());
  apply_causes(tx, spec.toxicity, causes);

  // reactive reply
  if (route.is_dm() && !replied) {
    const std::string key = last_rule_for_target.empty() ? "default" : last_rule_for_target;
    std::string text = generate_reply(*ctx.backend, *ctx.prompt, tx.state().feed,
                                      {route.actor_id, participant, key, {}}, ctx.max_context);
    const std::uint64_t rseq = tx.next_seq();
    tx.emit(ev::DmSent{{MessageId{"m-" + std::to_string(rseq)}, Party::actor(route.actor_id), me, std::move(text), tx.now(), rseq}});
  }
}

inline std::string request_hint(const PipelineContext& ctx, Transaction& tx) {
  if (tx.state().finished) fail(ErrorCode::SessionFinished, "session has finished");
  auto grant = request_hint(tx.state(), ctx.scenario_at(tx.state().runtime.index));
  tx.emit(grant.event);
  return grant.text;
}

inline void restart_scenario(const PipelineContext& ctx, Transaction& tx) {
  if (tx.state().finished) fail(ErrorCode::SessionFinished, "session has finished");
  check_restartable(tx.state().runtime);
  const std::size_t index = tx.state().runtime.index;
  tx.emit(ev::ScenarioRestarted{make_setup(ctx.scenario_at(index), index, tx.now())});
}

inline void start_session(const PipelineContext& ctx, Transaction& tx) {
  if (ctx.order.empty()) fail(ErrorCode::PackInvalid, "session has no scenarios");
  tx.emit(ev::ScenarioStarted{make_setup(ctx.scenario_at(0), 0, tx.now())});
}

/// Move to the next scenario. `manual` concludes a running scenario first.
inline void advance_scenario(const PipelineContext& ctx, Transaction& tx, bool manual) {
  if (tx.state().finished) fail(ErrorCode::SessionFinished, "session has finished");
  if (tx.state().runtime.running()) {
    if (!manual) fail(ErrorCode::ScenarioStillRunning, "scenario '" + tx.state().runtime.scenario_id + "' is still running");
    tx.emit(ev::ScenarioConcluded{ConclusionReason::ManualAdvance});
  }
  const std::size_t next = tx.state().runtime.index + 1;
  if (next >= ctx.order.size()) tx.emit(ev::SessionFinished{});
  else tx.emit(ev::ScenarioStarted{make_setup(ctx.scenario_at(next), next, tx.now())});
}

inline void add_reaction(Transaction& tx, const ParticipantId& participant, const PostId& post) {
  require_playable(tx.state());
  if (!tx.state().feed.participants.contains(participant))
    fail(ErrorCode::UnknownParticipant, "unknown participant '" + participant.value + "'");
  if (!detail::live_post(tx.state().feed, post.value))
    fail(ErrorCode::UnknownTarget, "unknown or deleted post '" + post.value + "'", {{"postId", post}});
  const Party me = Party::participant(participant);
  if (tx.state().feed.reactions.contains({post, me})) return;
  tx.emit(ev::ReactionAdded{post, me});
}

/// Participants may delete only their own comments.
inline void delete_own_comment(Transaction& tx, const ParticipantId& participant, const CommentId& comment) {
  require_playable(tx.state());
  const auto& feed = tx.state().feed;
  auto it = feed.comments.find(comment);
  if (it == feed.comments.end() || it->second.deleted)
    fail(ErrorCode::UnknownTarget, "unknown or deleted comment '" + comment.value + "'", {{"commentId", comment}});
  if (it->second.author != Party::participant(participant))
    fail(ErrorCode::UnknownTarget, "comment '" + comment.value + "' is not yours", {{"commentId", comment}});
  tx.emit(ev::CommentDeleted{comment});
}

}  // namespace feedsim
