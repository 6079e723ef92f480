#pragma once

#include <chrono>
#include <compare>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "feedsim/error.hpp"

namespace feedsim {

/// Simulation time in milliseconds since the session epoch. Always taken
/// from an injectable clock, never from wall time inside the engine.
using SimTime = std::chrono::milliseconds;

template <typename Tag>
struct Id {
  std::string value;

  Id() = default;
  explicit Id(std::string v) : value(std::move(v)) {}

  bool empty() const noexcept { return value.empty(); }
  const std::string& str() const noexcept { return value; }

  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;
};

template <typename Tag>
void to_json(nlohmann::json& j, const Id<Tag>& id) { j = id.value; }

template <typename Tag>
void from_json(const nlohmann::json& j, Id<Tag>& id) { id.value = j.get<std::string>(); }

using ActorId = Id<struct ActorTag>;
using ParticipantId = Id<struct ParticipantTag>;
using PostId = Id<struct PostTag>;
using CommentId = Id<struct CommentTag>;
using MessageId = Id<struct MessageTag>;
using SessionId = Id<struct SessionTag>;

/// Author or DM endpoint: either a scripted actor or a human participant.
struct Party {
  enum class Kind { Actor, Participant };

  Kind kind = Kind::Actor;
  std::string id;

  static Party actor(const ActorId& a) { return {Kind::Actor, a.value}; }
  static Party participant(const ParticipantId& p) { return {Kind::Participant, p.value}; }

  bool is_actor() const noexcept { return kind == Kind::Actor; }
  bool is_participant() const noexcept { return kind == Kind::Participant; }
  ActorId actor_id() const { return ActorId{id}; }
  ParticipantId participant_id() const { return ParticipantId{id}; }

  // "actor:<id>" / "participant:<id>"
  std::string to_string() const { return (is_actor() ? "actor:" : "participant:") + id; }

  static Party parse(std::string_view text) {
    if (text.starts_with("actor:")) return {Kind::Actor, std::string(text.substr(6))};
    if (text.starts_with("participant:")) return {Kind::Participant, std::string(text.substr(12))};
    fail(ErrorCode::MalformedDocument, "bad party reference '" + std::string(text) + "'");
  }

  friend auto operator<=>(const Party&, const Party&) = default;
  friend bool operator==(const Party&, const Party&) = default;
};

inline void to_json(nlohmann::json& j, const Party& p) { j = p.to_string(); }
inline void from_json(const nlohmann::json& j, Party& p) { p = Party::parse(j.get<std::string>()); }

}  // namespace feedsim
