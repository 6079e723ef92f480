#pragma once

#include <string>
#include <vector>

#include "feedsim/error.hpp"
#include "feedsim/events.hpp"
#include "feedsim/model.hpp"
#include "feedsim/pack.hpp"

namespace feedsim {

/// Replace the scenario content of `state` with the seeded actors, posts and
/// comments. Participants and last_seq are kept.
inline void reset_feed(FeedState& state, const std::vector<Actor>& actors, const std::vector<FeedPost>& posts,
                       const std::vector<Comment>& comments) {
  state.actors.clear();
  state.posts.clear();
  state.comments.clear();
  state.reactions.clear();
  state.dm_threads.clear();
  for (const auto& a : actors) state.actors.emplace(a.id, a);
  for (auto p : posts) {
    p.deleted = false;
    p.created_seq = 0;
    state.posts.emplace(p.id, std::move(p));
  }
  for (auto c : comments) {
    c.deleted = false;
    c.created_seq = 0;
    state.comments.emplace(c.id, std::move(c));
  }
}

inline std::vector<Actor> scenario_actors(const ScenarioSpec& scenario) {
  std::vector<Actor> out;
  out.reserve(scenario.actors.size());
  for (const auto& a : scenario.actors) out.push_back(a.actor);
  return out;
}

/// Fresh feed for `scenario`; scenario is assumed validated.
inline FeedState init_feed(const ScenarioSpec& scenario, const std::vector<Participant>& participants = {}) {
  FeedState state;
  for (const auto& p : participants) state.participants.emplace(p.id, p);
  reset_feed(state, scenario_actors(scenario), scenario.initial_posts, scenario.initial_comments);
  return state;
}

namespace detail {

inline void require_party(const FeedState& s, const Party& p) {
  if (!s.has_party(p)) fail(ErrorCode::DanglingReference, "unknown party " + p.to_string());
}

inline void require_fresh_id(const FeedState& s, const std::string& id) {
  if (s.posts.contains(PostId{id}) || s.comments.contains(CommentId{id}))
    fail(ErrorCode::DuplicateId, "id '" + id + "' already used in this feed");
}

struct FeedReducer {
  FeedState& s;
  const SessionEvent& e;

  void operator()(const ev::PostCreated& x) {
    require_fresh_id(s, x.post.id.value);
    require_party(s, x.post.author);
    FeedPost post = x.post;
    post.deleted = false;
    post.created_seq = e.seq;
    s.posts.emplace(post.id, std::move(post));
  }

  void operator()(const ev::PostDeleted& x) {
    auto it = s.posts.find(x.post_id);
    if (it == s.posts.end()) fail(ErrorCode::DanglingReference, "unknown post '" + x.post_id.value + "'");
    if (it->second.deleted) fail(ErrorCode::DoubleDelete, "post '" + x.post_id.value + "' already deleted");
    it->second.deleted = true;
  }

  void operator()(const ev::CommentCreated& x) {
    require_fresh_id(s, x.comment.id.value);
    require_party(s, x.comment.author);
    auto post = s.posts.find(x.comment.post_id);
    if (post == s.posts.end() || post->second.deleted)
      fail(ErrorCode::DanglingReference, "comment targets missing or deleted post '" + x.comment.post_id.value + "'");
    Comment c = x.comment;
    c.deleted = false;
    c.created_seq = e.seq;
    s.comments.emplace(c.id, std::move(c));
  }

  void operator()(const ev::CommentDeleted& x) {
    auto it = s.comments.find(x.comment_id);
    if (it == s.comments.end()) fail(ErrorCode::DanglingReference, "unknown comment '" + x.comment_id.value + "'");
    if (it->second.deleted) fail(ErrorCode::DoubleDelete, "comment '" + x.comment_id.value + "' already deleted");
    it->second.deleted = true;
  }

  void operator()(const ev::ReactionAdded& x) {
    auto post = s.posts.find(x.post_id);
    if (post == s.posts.end()) fail(ErrorCode::DanglingReference, "unknown post '" + x.post_id.value + "'");
    require_party(s, x.author);
    s.reactions.emplace(x.post_id, x.author);  // idempotent per (post, author)
  }

  void operator()(const ev::DmSent& x) {
    require_party(s, x.message.from);
    require_party(s, x.message.to);
    if (x.message.from == x.message.to) fail(ErrorCode::DanglingReference, "DM thread needs two distinct parties");
    auto& thread = s.dm_threads[ThreadKey::of(x.message.from, x.message.to)];
    for (const auto& m : thread)
      if (m.id == x.message.id) fail(ErrorCode::DuplicateId, "message id '" + x.message.id.value + "' reused");
    DirectMessage m = x.message;
    m.created_seq = e.seq;
    thread.push_back(std::move(m));
  }

  void operator()(const ev::ScenarioStarted& x) { reset_feed(s, x.setup.actors, x.setup.posts, x.setup.comments); }
  void operator()(const ev::ScenarioRestarted& x) { reset_feed(s, x.setup.actors, x.setup.posts, x.setup.comments); }

  // Runtime-only events leave the feed content untouched.
  void operator()(const ev::ChecklistItemCompleted&) {}
  void operator()(const ev::ToxicityChanged&) {}
  void operator()(const ev::HintIssued&) {}
  void operator()(const ev::ScenarioConcluded&) {}
  void operator()(const ev::TriggerFired&) {}
  void operator()(const ev::JudgeVerdictRecorded&) {}
  void operator()(const ev::SessionFinished&) {}
};

}  // namespace detail

/// Pure reducer: returns the successor state, `state` is untouched.
/// Throws SequenceGap, DanglingReference, DoubleDelete or DuplicateId.
inline FeedState apply_event(const FeedState& state, const SessionEvent& event) {
  if (event.seq != state.last_seq + 1)
    fail(ErrorCode::SequenceGap,
         "expected seq " + std::to_string(state.last_seq + 1) + ", got " + std::to_string(event.seq),
         {{"expected", state.last_seq + 1}, {"got", event.seq}});
  FeedState next = state;
  std::visit(detail::FeedReducer{next, event}, event.body);
  next.last_seq = event.seq;
  return next;
}

}  // namespace feedsim
