#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "feedsim/error.hpp"
#include "feedsim/ids.hpp"

namespace feedsim {

enum class Role { Bully, Victim, BystanderNeutral, BystanderInformant, BystanderHostile };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::Bully: return "Bully";
    case Role::Victim: return "Victim";
    case Role::BystanderNeutral: return "BystanderNeutral";
    case Role::BystanderInformant: return "BystanderInformant";
    case Role::BystanderHostile: return "BystanderHostile";
  }
  return "BystanderNeutral";
}

inline std::optional<Role> role_from_string(std::string_view s) {
  for (Role r : {Role::Bully, Role::Victim, Role::BystanderNeutral, Role::BystanderInformant,
                 Role::BystanderHostile}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

struct Actor {
  ActorId id;
  std::string handle;
  std::string display_name;
  Role role = Role::BystanderNeutral;
  std::string behavior_prompt;
  std::string profile_bio;
  std::string avatar_ref;

  friend bool operator==(const Actor&, const Actor&) = default;
};

struct Participant {
  ParticipantId id;
  std::string display_name;

  friend bool operator==(const Participant&, const Participant&) = default;
};

/// Half-open range [start, end) of Unicode code points inside a body.
struct FlaggedSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const FlaggedSpan&, const FlaggedSpan&) = default;
};

struct FeedPost {
  PostId id;
  Party author;
  std::string body;
  std::optional<std::string> image_ref;
  std::vector<FlaggedSpan> flagged_spans;
  SimTime created_at{0};
  std::uint64_t created_seq = 0;  // 0 for seeded content
  bool deleted = false;

  friend bool operator==(const FeedPost&, const FeedPost&) = default;
};

struct Comment {
  CommentId id;
  PostId post_id;
  Party author;
  std::string body;
  SimTime created_at{0};
  std::uint64_t created_seq = 0;
  bool deleted = false;

  friend bool operator==(const Comment&, const Comment&) = default;
};

struct DirectMessage {
  MessageId id;
  Party from;
  Party to;
  std::string body;
  SimTime created_at{0};
  std::uint64_t created_seq = 0;

  friend bool operator==(const DirectMessage&, const DirectMessage&) = default;
};

/// DM threads are keyed by the unordered pair of their two endpoints.
struct ThreadKey {
  Party a;
  Party b;

  static ThreadKey of(const Party& x, const Party& y) { return x < y ? ThreadKey{x, y} : ThreadKey{y, x}; }
  bool involves(const Party& p) const { return a == p || b == p; }
  const Party& other(const Party& p) const { return a == p ? b : a; }

  friend auto operator<=>(const ThreadKey&, const ThreadKey&) = default;
  friend bool operator==(const ThreadKey&, const ThreadKey&) = default;
};

using ReactionKey = std::pair<PostId, Party>;

struct FeedState {
  std::map<ActorId, Actor> actors;
  std::map<ParticipantId, Participant> participants;
  std::map<PostId, FeedPost> posts;
  std::map<CommentId, Comment> comments;
  std::set<ReactionKey> reactions;  // kind is always Like
  std::map<ThreadKey, std::vector<DirectMessage>> dm_threads;
  std::uint64_t last_seq = 0;

  bool has_party(const Party& p) const {
    return p.is_actor() ? actors.contains(p.actor_id()) : participants.contains(p.participant_id());
  }

  std::vector<std::string> tombstones() const {
    std::vector<std::string> out;
    for (const auto& [id, post] : posts)
      if (post.deleted) out.push_back(id.value);
    for (const auto& [id, c] : comments)
      if (c.deleted) out.push_back(id.value);
    return out;
  }

  const std::string& handle_of(const Party& p) const {
    if (p.is_actor()) {
      auto it = actors.find(p.actor_id());
      if (it != actors.end()) return it->second.handle;
    } else {
      auto it = participants.find(p.participant_id());
      if (it != participants.end()) return it->second.display_name;
    }
    return p.id;
  }

  friend bool operator==(const FeedState&, const FeedState&) = default;
};

/// Number of Unicode code points in a UTF-8 string (continuation bytes skipped).
inline std::size_t codepoint_count(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

// ---- JSON codecs -------------------------------------------------------------

inline void to_json(nlohmann::json& j, Role r) { j = std::string(to_string(r)); }
inline void from_json(const nlohmann::json& j, Role& r) {
  auto parsed = role_from_string(j.get<std::string>());
  if (!parsed) fail(ErrorCode::MalformedDocument, "unknown role '" + j.get<std::string>() + "'");
  r = *parsed;
}

inline void to_json(nlohmann::json& j, const FlaggedSpan& s) { j = nlohmann::json::array({s.start, s.end}); }
inline void from_json(const nlohmann::json& j, FlaggedSpan& s) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned())
    fail(ErrorCode::MalformedDocument, "flagged span must be [start, end] with non-negative integers");
  s.start = j[0].get<std::size_t>();
  s.end = j[1].get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const Actor& a) {
  j = {{"id", a.id},           {"handle", a.handle},         {"displayName", a.display_name},
       {"role", a.role},       {"behaviorPrompt", a.behavior_prompt},
       {"profileBio", a.profile_bio}, {"avatarRef", a.avatar_ref}};
}
inline void from_json(const nlohmann::json& j, Actor& a) {
  a.id = j.at("id").get<ActorId>();
  a.handle = j.at("handle").get<std::string>();
  a.display_name = j.at("displayName").get<std::string>();
  a.role = j.at("role").get<Role>();
  a.behavior_prompt = j.at("behaviorPrompt").get<std::string>();
  a.profile_bio = j.at("profileBio").get<std::string>();
  a.avatar_ref = j.at("avatarRef").get<std::string>();
}

inline void to_json(nlohmann::json& j, const Participant& p) {
  j = {{"id", p.id}, {"displayName", p.display_name}};
}
inline void from_json(const nlohmann::json& j, Participant& p) {
  p.id = j.at("id").get<ParticipantId>();
  p.display_name = j.at("displayName").get<std::string>();
}

inline void to_json(nlohmann::json& j, const FeedPost& p) {
  j = {{"id", p.id},
       {"author", p.author},
       {"body", p.body},
       {"flaggedSpans", p.flagged_spans},
       {"createdAt", p.created_at.count()},
       {"createdSeq", p.created_seq},
       {"deleted", p.deleted}};
  if (p.image_ref) j["imageRef"] = *p.image_ref;
}
inline void from_json(const nlohmann::json& j, FeedPost& p) {
  p.id = j.at("id").get<PostId>();
  p.author = j.at("author").get<Party>();
  p.body = j.at("body").get<std::string>();
  p.image_ref = j.contains("imageRef") ? std::optional(j.at("imageRef").get<std::string>()) : std::nullopt;
  p.flagged_spans = j.value("flaggedSpans", std::vector<FlaggedSpan>{});
  p.created_at = SimTime{j.value("createdAt", std::int64_t{0})};
  p.created_seq = j.value("createdSeq", std::uint64_t{0});
  p.deleted = j.value("deleted", false);
}

inline void to_json(nlohmann::json& j, const Comment& c) {
  j = {{"id", c.id},         {"postId", c.post_id},
       {"author", c.author}, {"body", c.body},
       {"createdAt", c.created_at.count()}, {"createdSeq", c.created_seq},
       {"deleted", c.deleted}};
}
inline void from_json(const nlohmann::json& j, Comment& c) {
  c.id = j.at("id").get<CommentId>();
  c.post_id = j.at("postId").get<PostId>();
  c.author = j.at("author").get<Party>();
  c.body = j.at("body").get<std::string>();
  c.created_at = SimTime{j.value("createdAt", std::int64_t{0})};
  c.created_seq = j.value("createdSeq", std::uint64_t{0});
  c.deleted = j.value("deleted", false);
}

inline void to_json(nlohmann::json& j, const DirectMessage& m) {
  j = {{"id", m.id},     {"from", m.from},
       {"to", m.to},     {"body", m.body},
       {"createdAt", m.created_at.count()}, {"createdSeq", m.created_seq}};
}
inline void from_json(const nlohmann::json& j, DirectMessage& m) {
  m.id = j.at("id").get<MessageId>();
  m.from = j.at("from").get<Party>();
  m.to = j.at("to").get<Party>();
  m.body = j.at("body").get<std::string>();
  m.created_at = SimTime{j.value("createdAt", std::int64_t{0})};
  m.created_seq = j.value("createdSeq", std::uint64_t{0});
}

/// Canonical form: object keys sorted (nlohmann's default std::map ordering),
/// collections emitted in key order, no insignificant whitespace on dump().
inline nlohmann::json canonical_json(const FeedState& s) {
  nlohmann::json j;
  j["actors"] = nlohmann::json::object();
  for (const auto& [id, a] : s.actors) j["actors"][id.value] = a;
  j["participants"] = nlohmann::json::object();
  for (const auto& [id, p] : s.participants) j["participants"][id.value] = p;
  j["posts"] = nlohmann::json::object();
  for (const auto& [id, p] : s.posts) j["posts"][id.value] = p;
  j["comments"] = nlohmann::json::object();
  for (const auto& [id, c] : s.comments) j["comments"][id.value] = c;
  j["reactions"] = nlohmann::json::array();
  for (const auto& [post, author] : s.reactions)
    j["reactions"].push_back({{"postId", post}, {"author", author}, {"kind", "Like"}});
  j["dmThreads"] = nlohmann::json::object();
  for (const auto& [key, msgs] : s.dm_threads) j["dmThreads"][key.a.to_string() + "|" + key.b.to_string()] = msgs;
  j["tombstones"] = s.tombstones();
  j["lastSeq"] = s.last_seq;
  return j;
}

inline FeedState feed_state_from_json(const nlohmann::json& j) {
  FeedState s;
  for (const auto& [id, a] : j.at("actors").items()) s.actors.emplace(ActorId{id}, a.get<Actor>());
  for (const auto& [id, p] : j.at("participants").items())
    s.participants.emplace(ParticipantId{id}, p.get<Participant>());
  for (const auto& [id, p] : j.at("posts").items()) s.posts.emplace(PostId{id}, p.get<FeedPost>());
  for (const auto& [id, c] : j.at("comments").items()) s.comments.emplace(CommentId{id}, c.get<Comment>());
  for (const auto& r : j.at("reactions")) s.reactions.emplace(r.at("postId").get<PostId>(), r.at("author").get<Party>());
  for (const auto& [key, msgs] : j.at("dmThreads").items()) {
    auto bar = key.find('|');
    auto tk = ThreadKey::of(Party::parse(key.substr(0, bar)), Party::parse(key.substr(bar + 1)));
    s.dm_threads.emplace(tk, msgs.get<std::vector<DirectMessage>>());
  }
  s.last_seq = j.at("lastSeq").get<std::uint64_t>();
  return s;
}

}  // namespace feedsim
