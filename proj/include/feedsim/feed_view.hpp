#pragma once

#include <algorithm>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "feedsim/error.hpp"
#include "feedsim/model.hpp"

namespace feedsim {

struct PostView {
  FeedPost post;
  std::vector<Comment> comments;  // oldest first, deleted omitted
  std::vector<Party> liked_by;
};

/// Newest-first public feed. Ties on createdAt go to the later creation seq,
/// then to the smaller id so the order is total.
inline std::vector<PostView> visible_feed(const FeedState& state, const Party& viewer) {
  if (!state.has_party(viewer)) fail(ErrorCode::UnknownViewer, "unknown viewer " + viewer.to_string());

  std::vector<PostView> out;
  for (const auto& [id, post] : state.posts) {
    if (post.deleted) continue;
    out.push_back({post, {}, {}});
  }
  std::sort(out.begin(), out.end(), [](const PostView& a, const PostView& b) {
    if (a.post.created_at != b.post.created_at) return a.post.created_at > b.post.created_at;
    if (a.post.created_seq != b.post.created_seq) return a.post.created_seq > b.post.created_seq;
    return a.post.id < b.post.id;
  });
  for (auto& view : out) {
    for (const auto& [cid, c] : state.comments)
      if (!c.deleted && c.post_id == view.post.id) view.comments.push_back(c);
    std::sort(view.comments.begin(), view.comments.end(), [](const Comment& a, const Comment& b) {
      if (a.created_at != b.created_at) return a.created_at < b.created_at;
      if (a.created_seq != b.created_seq) return a.created_seq < b.created_seq;
      return a.id < b.id;
    });
    for (const auto& [post_id, author] : state.reactions)
      if (post_id == view.post.id) view.liked_by.push_back(author);
  }
  return out;
}

struct ProfileView {
  Actor actor;
  std::vector<FeedPost> posts;    // non-deleted, oldest first
  std::vector<Comment> comments;  // non-deleted, oldest first
};

inline ProfileView actor_profile(const FeedState& state, const ActorId& actor) {
  auto it = state.actors.find(actor);
  if (it == state.actors.end()) fail(ErrorCode::UnknownActor, "unknown actor '" + actor.value + "'");
  ProfileView view{it->second, {}, {}};
  const Party author = Party::actor(actor);
  for (const auto& [id, p] : state.posts)
    if (!p.deleted && p.author == author) view.posts.push_back(p);
  for (const auto& [id, c] : state.comments)
    if (!c.deleted && c.author == author) view.comments.push_back(c);
  auto by_time = [](const auto& a, const auto& b) {
    return std::tie(a.created_at, a.created_seq, a.id) < std::tie(b.created_at, b.created_seq, b.id);
  };
  std::sort(view.posts.begin(), view.posts.end(), by_time);
  std::sort(view.comments.begin(), view.comments.end(), by_time);
  return view;
}

inline nlohmann::json post_view_json(const FeedState& state, const PostView& v) {
  nlohmann::json comments = nlohmann::json::array();
  for (const auto& c : v.comments) {
    comments.push_back({{"id", c.id},
                        {"author", c.author},
                        {"authorHandle", state.handle_of(c.author)},
                        {"body", c.body},
                        {"createdAt", c.created_at.count()}});
  }
  nlohmann::json j{{"id", v.post.id},
                   {"author", v.post.author},
                   {"authorHandle", state.handle_of(v.post.author)},
                   {"body", v.post.body},
                   {"flaggedSpans", v.post.flagged_spans},
                   {"createdAt", v.post.created_at.count()},
                   {"comments", comments},
                   {"likeCount", v.liked_by.size()},
                   {"likedBy", v.liked_by}};
  if (v.post.image_ref) j["imageRef"] = *v.post.image_ref;
  return j;
}

inline nlohmann::json profile_json(const ProfileView& p) {
  nlohmann::json posts = nlohmann::json::array();
  for (const auto& post : p.posts)
    posts.push_back({{"id", post.id}, {"body", post.body}, {"flaggedSpans", post.flagged_spans},
                     {"createdAt", post.created_at.count()}});
  nlohmann::json comments = nlohmann::json::array();
  for (const auto& c : p.comments)
    comments.push_back({{"id", c.id}, {"postId", c.post_id}, {"body", c.body}, {"createdAt", c.created_at.count()}});
  return {{"actorId", p.actor.id},       {"handle", p.actor.handle}, {"displayName", p.actor.display_name},
          {"bio", p.actor.profile_bio},  {"avatarRef", p.actor.avatar_ref},
          {"posts", posts},              {"comments", comments}};
}

}  // namespace feedsim
