#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "feedsim/engine.hpp"
#include "feedsim/error.hpp"
#include "feedsim/model.hpp"
#include "feedsim/pack.hpp"

namespace feedsim {

// ---- system prompt -----------------------------------------------------------

inline constexpr std::string_view kDefaultPromptTemplate =
    "You are now role-playing as ${otherUsername}:\n"
    "${behavior} in a social media simulation like Instagram. You should talk like the character, not like an AI. "
    "The conversations are generally short, reflecting that of a teenager in social media feed. "
    "Here is your activity history in the simulation so far:\n"
    "${actorContext}";

/// Template with the three slots otherUsername, behavior, actorContext.
class PromptTemplate {
 public:
  static constexpr std::string_view kSlots[] = {"otherUsername", "behavior", "actorContext"};

  explicit PromptTemplate(std::string text = std::string(kDefaultPromptTemplate)) : text_(std::move(text)) {
    for (auto slot : kSlots)
      if (text_.find("${" + std::string(slot) + "}") == std::string::npos)
        fail(ErrorCode::MissingPlaceholder, "template lacks ${" + std::string(slot) + "}", {{"slot", slot}});
  }

  const std::string& text() const { return text_; }

  /// Single left-to-right pass; substituted values are never rescanned.
  std::string render(const std::map<std::string, std::string, std::less<>>& values) const {
    std::string out;
    out.reserve(text_.size() + 256);
    std::size_t i = 0;
    while (i < text_.size()) {
      auto open = text_.find("${", i);
      if (open == std::string::npos) break;
      auto close = text_.find('}', open + 2);
      if (close == std::string::npos) break;
      out.append(text_, i, open - i);
      auto it = values.find(std::string_view(text_).substr(open + 2, close - open - 2));
      if (it != values.end()) out += it->second;
      else out.append(text_, open, close - open + 1);
      i = close + 1;
    }
    out.append(text_, i, std::string::npos);
    return out;
  }

 private:
  std::string text_;
};

// ---- actor context -----------------------------------------------------------

inline constexpr std::size_t kDefaultMaxContextEvents = 30;

struct ContextLine {
  SimTime at{0};
  std::uint64_t seq = 0;
  std::string id;
  std::string text;
};

/// What `actor` has seen or done: every live public post and comment, its own
/// deleted content as tombstones, and every DM in a thread it belongs to.
/// Chronological by (createdAt, createdSeq, id); the newest maxEvents are kept.
inline std::vector<std::string> build_actor_context(const FeedState& state, const ActorId& actor,
                                                    std::size_t max_events = kDefaultMaxContextEvents) {
  if (!state.actors.contains(actor)) fail(ErrorCode::UnknownActor, "unknown actor '" + actor.value + "'");
  const Party self = Party::actor(actor);
  std::vector<ContextLine> lines;
  auto line = [&](SimTime at, std::uint64_t seq, const std::string& id, std::string_view kind, const Party& author,
                  const std::string& body) {
    lines.push_back({at, seq, id,
                     "[" + std::to_string(at.count()) + "] " + std::string(kind) + " " + state.handle_of(author) + ": " +
                         body});
  };
  for (const auto& [id, p] : state.posts) {
    if (!p.deleted) line(p.created_at, p.created_seq, id.value, "post", p.author, p.body);
    else if (p.author == self) line(p.created_at, p.created_seq, id.value, "deleted-post", p.author, p.body);
  }
  for (const auto& [id, c] : state.comments) {
    if (!c.deleted) line(c.created_at, c.created_seq, id.value, "comment", c.author, c.body);
    else if (c.author == self) line(c.created_at, c.created_seq, id.value, "deleted-comment", c.author, c.body);
  }
  for (const auto& [key, thread] : state.dm_threads) {
    if (!key.involves(self)) continue;
    for (const auto& m : thread) line(m.created_at, m.created_seq, m.id.value, "dm", m.from, m.body);
  }
  std::sort(lines.begin(), lines.end(),
            [](const ContextLine& a, const ContextLine& b) { return std::tie(a.at, a.seq, a.id) < std::tie(b.at, b.seq, b.id); });
  const std::size_t skip = lines.size() > max_events ? lines.size() - max_events : 0;
  std::vector<std::string> out;
  for (std::size_t i = skip; i < lines.size(); ++i) out.push_back(std::move(lines[i].text));
  return out;
}

inline std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

inline std::string render_system_prompt(const PromptTemplate& tpl, const Actor& actor,
                                        const std::vector<std::string>& context) {
  if (actor.behavior_prompt.empty()) fail(ErrorCode::PackInvalid, "actor '" + actor.id.value + "' has no behavior prompt");
  return tpl.render({{"otherUsername", actor.handle}, {"behavior", actor.behavior_prompt}, {"actorContext", join_lines(context)}});
}

// ---- backends ----------------------------------------------------------------

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionRequest {
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  ActorId actor_id;
  std::string reply_key;         // scripted lookup key: default, apology, supportive, thanks, frustration, toneRef
  std::string participant_name;  // fills {{participant}} in canned lines
};

struct JudgeRequest {
  std::string predicate;
  std::string criterion;
  std::string text;
};

struct JudgeResult {
  bool value = false;
  double confidence = 0.0;
  std::string rationale;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Throws Error(BackendUnavailable) on transport or model failure.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual JudgeResult judge(const JudgeRequest& request) = 0;
};

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline std::string fill_participant(const std::string& text, const std::string& participant) {
  return replace_all(text, kParticipantPlaceholder, participant);
}

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

/// Deterministic backend: canned lines from the pack, regex judging.
/// Lookup: (actor, key), then (actor, "default"), then the global default line.
class ScriptedBackend : public ChatBackend {
 public:
  static constexpr std::string_view kGlobalDefault = "ok";

  ScriptedBackend() = default;
  explicit ScriptedBackend(const ScenarioPack& pack) {
    for (const auto& s : pack.scenarios)
      for (const auto& a : s.actors)
        for (const auto& [key, line] : a.scripted_replies) lines_[{a.actor.id.value, key}] = line;
    for (const auto& s : pack.scenarios)
      for (const auto& p : s.predicates) add_patterns(p);
  }

  void set_line(const std::string& actor, const std::string& key, std::string line) { lines_[{actor, key}] = std::move(line); }
  void add_patterns(const PredicateDef& p) {
    auto& res = patterns_[p.name];
    res.clear();
    for (const auto& pat : p.patterns) res.push_back(compile_pattern(pat));
  }

  std::string complete(const CompletionRequest& r) override {
    auto it = lines_.find({r.actor_id.value, r.reply_key});
    if (it == lines_.end()) it = lines_.find({r.actor_id.value, "default"});
    const std::string line = it == lines_.end() ? std::string(kGlobalDefault) : it->second;
    return fill_participant(line, r.participant_name);
  }

  JudgeResult judge(const JudgeRequest& r) override {
    auto it = patterns_.find(r.predicate);
    if (it == patterns_.end()) return {false, 1.0, {}};
    return {match_any(it->second, r.text), 1.0, {}};
  }

  static bool match_any(const std::vector<std::regex>& patterns, const std::string& text) {
    if (is_blank(text)) return false;
    return std::any_of(patterns.begin(), patterns.end(), [&](const std::regex& re) { return std::regex_search(text, re); });
  }

 private:
  std::map<std::pair<std::string, std::string>, std::string> lines_;
  std::map<std::string, std::vector<std::regex>> patterns_;
};

// ---- judging -----------------------------------------------------------------

/// One boolean per predicate applicable to `route`. Scripted mode evaluates
/// patterns only. LlmJudge mode asks the backend and falls back to patterns
/// when the backend is unavailable.
inline ev::JudgeVerdictRecorded judge_message(ChatBackend& backend, JudgeMode mode, const CompiledScenario& scenario,
                                              const std::string& message_id, const std::string& text,
                                              const Route& route) {
  ev::JudgeVerdictRecorded v;
  v.message_id = message_id;
  for (const auto* p : predicates_for_route(scenario.spec(), route)) {
    const auto& patterns = scenario.patterns(p->name);
    if (is_blank(text)) {
      v.assignment[p->name] = false;
      v.sources[p->name] = mode == JudgeMode::Scripted ? VerdictSource::Pattern : VerdictSource::Model;
      continue;
    }
    if (mode == JudgeMode::Scripted || p->criterion.empty()) {
      v.assignment[p->name] = ScriptedBackend::match_any(patterns, text);
      v.sources[p->name] = VerdictSource::Pattern;
      continue;
    }
    try {
      auto r = backend.judge({p->name, p->criterion, text});
      v.assignment[p->name] = r.value;
      v.sources[p->name] = VerdictSource::Model;
      if (!r.rationale.empty()) v.rationale[p->name] = r.rationale;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BackendUnavailable) throw;
      v.assignment[p->name] = ScriptedBackend::match_any(patterns, text);
      v.sources[p->name] = VerdictSource::Fallback;
    }
  }
  return v;
}

// ---- replies -----------------------------------------------------------------

/// DM transcript between `actor` and `participant`, actor turns as assistant.
inline std::vector<ChatMessage> dm_transcript(const FeedState& state, const ActorId& actor, const ParticipantId& participant) {
  std::vector<ChatMessage> out;
  auto it = state.dm_threads.find(ThreadKey::of(Party::actor(actor), Party::participant(participant)));
  if (it == state.dm_threads.end()) return out;
  for (const auto& m : it->second) out.push_back({m.from.is_actor() ? "assistant" : "user", m.body});
  return out;
}

struct ReplyRequest {
  ActorId actor;
  ParticipantId participant;
  std::string reply_key = "default";
  std::string instruction;  // appended as a final user turn for model backends
};

/// Non-empty reply text from `backend` for `actor` in the current state.
inline std::string generate_reply(ChatBackend& backend, const PromptTemplate& tpl, const FeedState& state,
                                  const ReplyRequest& req, std::size_t max_context = kDefaultMaxContextEvents) {
  auto actor = state.actors.find(req.actor);
  if (actor == state.actors.end()) fail(ErrorCode::UnknownActor, "unknown actor '" + req.actor.value + "'");
  auto participant = state.participants.find(req.participant);
  if (participant == state.participants.end())
    fail(ErrorCode::UnknownParticipant, "unknown participant '" + req.participant.value + "'");
  CompletionRequest c;
  c.system_prompt = render_system_prompt(tpl, actor->second, build_actor_context(state, req.actor, max_context));
  c.messages = dm_transcript(state, req.actor, req.participant);
  if (!req.instruction.empty()) c.messages.push_back({"user", req.instruction});
  c.actor_id = req.actor;
  c.reply_key = req.reply_key;
  c.participant_name = participant->second.display_name;
  std::string text = backend.complete(c);
  if (is_blank(text)) fail(ErrorCode::BackendUnavailable, "backend returned an empty reply");
  return text;
}

}  // namespace feedsim
