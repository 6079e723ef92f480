#pragma once

#include <string>

#include <json.hpp>

#include "feedsim/engine.hpp"
#include "feedsim/feed_view.hpp"
#include "feedsim/pack.hpp"

namespace feedsim {

inline nlohmann::json message_json(const FeedState& s, const DirectMessage& m) {
  return {{"id", m.id},
          {"from", m.from},
          {"fromHandle", s.handle_of(m.from)},
          {"to", m.to},
          {"body", m.body},
          {"createdAt", m.created_at.count()}};
}

/// DM threads of one participant, ordered by counterpart.
inline nlohmann::json dm_threads_json(const FeedState& s, const ParticipantId& participant) {
  const Party me = Party::participant(participant);
  nlohmann::json threads = nlohmann::json::array();
  for (const auto& [key, msgs] : s.dm_threads) {
    if (!key.involves(me)) continue;
    const Party& other = key.other(me);
    nlohmann::json m = nlohmann::json::array();
    for (const auto& msg : msgs) m.push_back(message_json(s, msg));
    threads.push_back({{"with", other}, {"withHandle", s.handle_of(other)}, {"messages", m}});
  }
  return threads;
}

/// Public actor fields only; roles and prompts never leave the server.
inline nlohmann::json public_actors_json(const FeedState& s) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [id, a] : s.actors)
    out.push_back({{"actorId", a.id}, {"handle", a.handle}, {"displayName", a.display_name},
                   {"bio", a.profile_bio}, {"avatarRef", a.avatar_ref}});
  return out;
}

/// Part of the view every participant sees identically at a given lastSeq
/// and clock reading. `spec` is the current scenario.
inline nlohmann::json shared_view_json(const SessionState& st, const ScenarioSpec& spec, std::size_t scenario_count,
                                       SimTime now) {
  using nlohmann::json;
  const auto& r = st.runtime;
  json feed = json::array();
  for (const auto& pv : visible_feed(st.feed, Party::participant(st.feed.participants.begin()->first)))
    feed.push_back(post_view_json(st.feed, pv));
  json participants = json::array();
  for (const auto& [id, p] : st.feed.participants) participants.push_back({{"participantId", id}, {"displayName", p.display_name}});

  const auto remaining_ms = r.running() ? std::max<std::int64_t>(0, (r.deadline_at - now).count()) : 0;
  json scenario{{"id", spec.id},
                {"title", spec.title},
                {"index", r.index},
                {"count", scenario_count},
                {"level", spec.level},
                {"scenarioType", std::string(to_string(spec.scenario_type))},
                {"isTransfer", spec.is_transfer},
                {"status", r.running() ? "Running" : "Concluded"},
                {"run", r.run},
                {"deadlineAt", r.deadline_at.count()},
                {"remainingSeconds", (remaining_ms + 999) / 1000}};
  if (r.conclusion) scenario["conclusionReason"] = std::string(to_string(*r.conclusion));

  json v{{"lastSeq", st.last_seq()},
         {"sessionStatus", st.finished ? "Finished" : "Active"},
         {"scenario", scenario},
         {"feed", feed},
         {"actors", public_actors_json(st.feed)},
         {"participants", participants}};
  if (r.conclusion) v["reflectionText"] = spec.reflection_text;
  if (!spec.is_transfer) {
    json checklist = json::array();
    for (const auto& item : spec.checklist) {
      auto it = r.checklist.find(item.item_id);
      checklist.push_back({{"itemId", item.item_id}, {"label", item.label}, {"done", it != r.checklist.end() && it->second}});
    }
    v["checklist"] = checklist;
    v["toxicity"] = {{"value", r.toxicity},
                     {"floor", spec.toxicity.floor},
                     {"ceiling", spec.toxicity.ceiling},
                     {"failThreshold", spec.toxicity.fail_threshold}};
    v["hintsRemaining"] = std::max(0, kSessionHintBudget - st.hints_used);
    json shown = json::array();
    auto d = st.hints_disclosed.find(spec.id);
    const std::size_t n = d == st.hints_disclosed.end() ? 0 : std::min(d->second, spec.hints.size());
    for (std::size_t i = 0; i < n; ++i) shown.push_back(spec.hints[i]);
    v["hints"] = shown;
  }
  return v;
}

inline nlohmann::json session_view_json(const SessionState& st, const ScenarioSpec& spec, std::size_t scenario_count,
                                        const ParticipantId& viewer, SimTime now) {
  auto it = st.feed.participants.find(viewer);
  if (it == st.feed.participants.end()) fail(ErrorCode::UnknownParticipant, "unknown participant '" + viewer.value + "'");
  auto v = shared_view_json(st, spec, scenario_count, now);
  v["viewer"] = {{"participantId", viewer}, {"displayName", it->second.display_name},
                 {"dmThreads", dm_threads_json(st.feed, viewer)}};
  return v;
}

}  // namespace feedsim
