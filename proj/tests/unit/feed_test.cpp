#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "feedsim/agent.hpp"
#include "feedsim/feed_view.hpp"
#include "feedsim/reducer.hpp"
#include "test_support.hpp"

using namespace feedsim;
using feedsim::test::shipped_scenario;

namespace {

const Party kAlex = Party::participant(ParticipantId{"alex"});
const Party kSam = Party::participant(ParticipantId{"sam"});

FeedState base_state() {
  FeedState s;
  s.actors.emplace(ActorId{"amy"}, Actor{ActorId{"amy"}, "amyoko_", "Amy", Role::Bully, "prompt", "", ""});
  s.actors.emplace(ActorId{"tina"}, Actor{ActorId{"tina"}, "tina.c", "Tina", Role::BystanderInformant, "prompt", "", ""});
  s.participants.emplace(ParticipantId{"alex"}, Participant{ParticipantId{"alex"}, "alex"});
  s.participants.emplace(ParticipantId{"sam"}, Participant{ParticipantId{"sam"}, "sam"});
  return s;
}

SessionEvent event(std::uint64_t seq, EventBody body, std::int64_t at = 0) { return {seq, SimTime{at}, std::move(body)}; }

FeedPost post(const std::string& id, const Party& author, std::int64_t at = 0) {
  FeedPost p;
  p.id = PostId{id};
  p.author = author;
  p.body = "body of " + id;
  p.created_at = SimTime{at};
  return p;
}

Comment comment(const std::string& id, const std::string& post_id, const Party& author, std::int64_t at = 0) {
  return {CommentId{id}, PostId{post_id}, author, "comment " + id, SimTime{at}, 0, false};
}

// Brute-force model built straight from the event list.
struct OracleItem {
  std::string id, post_id, body;
  Party author;
  std::int64_t at;
  std::uint64_t seq;
  bool deleted = false;
};

struct Oracle {
  std::vector<OracleItem> posts, comments;
  std::vector<std::pair<std::string, Party>> likes;
  std::vector<DirectMessage> dms;

  void feed(const SessionEvent& e) {
    if (auto* x = e.as<ev::PostCreated>())
      posts.push_back({x->post.id.value, "", x->post.body, x->post.author, x->post.created_at.count(), e.seq});
    if (auto* x = e.as<ev::PostDeleted>())
      for (auto& p : posts) if (p.id == x->post_id.value) p.deleted = true;
    if (auto* x = e.as<ev::CommentCreated>())
      comments.push_back({x->comment.id.value, x->comment.post_id.value, x->comment.body, x->comment.author,
                          x->comment.created_at.count(), e.seq});
    if (auto* x = e.as<ev::CommentDeleted>())
      for (auto& c : comments) if (c.id == x->comment_id.value) c.deleted = true;
    if (auto* x = e.as<ev::ReactionAdded>()) {
      std::pair<std::string, Party> k{x->post_id.value, x->author};
      if (std::find(likes.begin(), likes.end(), k) == likes.end()) likes.push_back(k);
    }
    if (auto* x = e.as<ev::DmSent>()) {
      auto m = x->message;
      m.created_seq = e.seq;
      dms.push_back(m);
    }
  }

  std::vector<std::string> feed_order() const {
    std::vector<OracleItem> live;
    for (const auto& p : posts) if (!p.deleted) live.push_back(p);
    std::stable_sort(live.begin(), live.end(), [](const OracleItem& a, const OracleItem& b) {
      if (a.at != b.at) return a.at > b.at;
      if (a.seq != b.seq) return a.seq > b.seq;
      return a.id < b.id;
    });
    std::vector<std::string> out;
    for (const auto& p : live) {
      out.push_back("P:" + p.id);
      std::vector<OracleItem> cs;
      for (const auto& c : comments) if (!c.deleted && c.post_id == p.id) cs.push_back(c);
      std::stable_sort(cs.begin(), cs.end(), [](const OracleItem& a, const OracleItem& b) {
        return std::tie(a.at, a.seq, a.id) < std::tie(b.at, b.seq, b.id);
      });
      for (const auto& c : cs) out.push_back("C:" + c.id);
      std::size_t n = 0;
      for (const auto& l : likes) if (l.first == p.id) ++n;
      out.push_back("L:" + std::to_string(n));
    }
    return out;
  }

  std::vector<std::string> context(const FeedState& s, const Party& self, std::size_t max) const {
    struct Line { std::int64_t at; std::uint64_t seq; std::string id, text; };
    std::vector<Line> lines;
    auto add = [&](const OracleItem& i, const std::string& kind) {
      lines.push_back({i.at, i.seq, i.id, "[" + std::to_string(i.at) + "] " + kind + " " + s.handle_of(i.author) + ": " + i.body});
    };
    for (const auto& p : posts) {
      if (!p.deleted) add(p, "post");
      else if (p.author == self) add(p, "deleted-post");
    }
    for (const auto& c : comments) {
      if (!c.deleted) add(c, "comment");
      else if (c.author == self) add(c, "deleted-comment");
    }
    for (const auto& m : dms)
      if (m.from == self || m.to == self)
        lines.push_back({m.created_at.count(), m.created_seq, m.id.value,
                         "[" + std::to_string(m.created_at.count()) + "] dm " + s.handle_of(m.from) + ": " + m.body});
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return std::tie(a.at, a.seq, a.id) < std::tie(b.at, b.seq, b.id); });
    std::vector<std::string> out;
    for (std::size_t i = lines.size() > max ? lines.size() - max : 0; i < lines.size(); ++i) out.push_back(lines[i].text);
    return out;
  }
};

std::vector<std::string> feed_order(const FeedState& s) {
  std::vector<std::string> out;
  for (const auto& pv : visible_feed(s, kAlex)) {
    out.push_back("P:" + pv.post.id.value);
    for (const auto& c : pv.comments) out.push_back("C:" + c.id.value);
    out.push_back("L:" + std::to_string(pv.liked_by.size()));
  }
  return out;
}

/// Random valid event stream; invalid draws are skipped so every event applies.
std::vector<SessionEvent> random_events(std::mt19937& rng, std::size_t n) {
  const std::vector<Party> parties{Party::actor(ActorId{"amy"}), Party::actor(ActorId{"tina"}), kAlex, kSam};
  std::vector<SessionEvent> out;
  FeedState s = base_state();
  std::uniform_int_distribution<int> kind(0, 5), party(0, 3), at(0, 20);
  int next_id = 0;
  while (out.size() < n) {
    const std::uint64_t seq = s.last_seq + 1;
    std::optional<EventBody> body;
    std::vector<std::string> live_posts, live_comments;
    for (const auto& [id, p] : s.posts) if (!p.deleted) live_posts.push_back(id.value);
    for (const auto& [id, c] : s.comments) if (!c.deleted) live_comments.push_back(id.value);
    auto choose = [&](const std::vector<std::string>& v) { return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)]; };
    const std::int64_t t = at(rng) * 100;  // many timestamp ties on purpose
    switch (kind(rng)) {
      case 0: body = ev::PostCreated{post("p" + std::to_string(next_id++), parties[party(rng)], t)}; break;
      case 1: if (!live_posts.empty()) body = ev::PostDeleted{PostId{choose(live_posts)}}; break;
      case 2: if (!live_posts.empty()) body = ev::CommentCreated{comment("c" + std::to_string(next_id++), choose(live_posts), parties[party(rng)], t)}; break;
      case 3: if (!live_comments.empty()) body = ev::CommentDeleted{CommentId{choose(live_comments)}}; break;
      case 4: if (!live_posts.empty()) body = ev::ReactionAdded{PostId{choose(live_posts)}, parties[party(rng)]}; break;
      case 5: {
        int a = party(rng), b = party(rng);
        if (a == b) break;
        body = ev::DmSent{{MessageId{"m" + std::to_string(next_id++)}, parties[a], parties[b], "dm text", SimTime{t}, 0}};
        break;
      }
    }
    if (!body) continue;
    SessionEvent e{seq, SimTime{t}, *body};
    s = apply_event(s, e);
    out.push_back(e);
  }
  return out;
}

}  // namespace

TEST(FeedReducer, RejectsSequenceGaps) {
  FeedState s = base_state();
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(2, ev::PostCreated{post("p", kAlex)})), ErrorCode::SequenceGap);
  s = apply_event(s, event(1, ev::PostCreated{post("p", kAlex)}));
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(1, ev::PostDeleted{PostId{"p"}})), ErrorCode::SequenceGap);
}

TEST(FeedReducer, IsPure) {
  const FeedState s = base_state();
  const FeedState copy = s;
  auto next = apply_event(s, event(1, ev::PostCreated{post("p", kAlex)}));
  EXPECT_EQ(s, copy);
  EXPECT_EQ(next.posts.size(), 1u);
  EXPECT_EQ(next.posts.at(PostId{"p"}).created_seq, 1u);
}

TEST(FeedReducer, DeleteRules) {
  FeedState s = base_state();
  s = apply_event(s, event(1, ev::PostCreated{post("p", kAlex)}));
  s = apply_event(s, event(2, ev::CommentCreated{comment("c", "p", kSam)}));
  s = apply_event(s, event(3, ev::CommentDeleted{CommentId{"c"}}));
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(4, ev::CommentDeleted{CommentId{"c"}})), ErrorCode::DoubleDelete);
  s = apply_event(s, event(4, ev::PostDeleted{PostId{"p"}}));
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(5, ev::PostDeleted{PostId{"p"}})), ErrorCode::DoubleDelete);
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(5, ev::CommentCreated{comment("c2", "p", kSam)})), ErrorCode::DanglingReference);
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(5, ev::PostDeleted{PostId{"nope"}})), ErrorCode::DanglingReference);
  // tombstones stay in state
  EXPECT_EQ(s.tombstones(), (std::vector<std::string>{"p", "c"}));
}

TEST(FeedReducer, RejectsUnknownPartiesAndReusedIds) {
  FeedState s = base_state();
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(1, ev::PostCreated{post("p", Party::actor(ActorId{"ghost"}))})),
                       ErrorCode::DanglingReference);
  s = apply_event(s, event(1, ev::PostCreated{post("p", kAlex)}));
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(2, ev::PostCreated{post("p", kSam)})), ErrorCode::DuplicateId);
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(2, ev::CommentCreated{comment("p", "p", kSam)})), ErrorCode::DuplicateId);
  EXPECT_FEEDSIM_ERROR(apply_event(s, event(2, ev::DmSent{{MessageId{"m"}, kAlex, kAlex, "x", SimTime{0}, 0}})),
                       ErrorCode::DanglingReference);
}

TEST(FeedReducer, ReactionsAreIdempotentPerAuthor) {
  FeedState s = base_state();
  s = apply_event(s, event(1, ev::PostCreated{post("p", kAlex)}));
  s = apply_event(s, event(2, ev::ReactionAdded{PostId{"p"}, kSam}));
  s = apply_event(s, event(3, ev::ReactionAdded{PostId{"p"}, kSam}));
  EXPECT_EQ(s.reactions.size(), 1u);
}

TEST(FeedView, NewestFirstWithTotalTieBreak) {
  FeedState s = base_state();
  s = apply_event(s, event(1, ev::PostCreated{post("b", kAlex, 100)}));
  s = apply_event(s, event(2, ev::PostCreated{post("a", kAlex, 100)}));
  s = apply_event(s, event(3, ev::PostCreated{post("c", kAlex, 50)}));
  auto feed = visible_feed(s, kAlex);
  ASSERT_EQ(feed.size(), 3u);
  EXPECT_EQ(feed[0].post.id.value, "a");  // same time, later seq first
  EXPECT_EQ(feed[1].post.id.value, "b");
  EXPECT_EQ(feed[2].post.id.value, "c");
  EXPECT_FEEDSIM_ERROR(visible_feed(s, Party::participant(ParticipantId{"nobody"})), ErrorCode::UnknownViewer);
}

TEST(FeedView, ProfileListsOnlyLiveOwnContent) {
  FeedState s = base_state();
  const Party amy = Party::actor(ActorId{"amy"});
  s = apply_event(s, event(1, ev::PostCreated{post("p1", amy, 10)}));
  s = apply_event(s, event(2, ev::PostCreated{post("p2", amy, 5)}));
  s = apply_event(s, event(3, ev::CommentCreated{comment("c1", "p1", amy)}));
  s = apply_event(s, event(4, ev::CommentCreated{comment("c2", "p1", kAlex)}));
  s = apply_event(s, event(5, ev::PostDeleted{PostId{"p1"}}));
  auto prof = actor_profile(s, ActorId{"amy"});
  ASSERT_EQ(prof.posts.size(), 1u);
  EXPECT_EQ(prof.posts[0].id.value, "p2");
  ASSERT_EQ(prof.comments.size(), 1u);
  EXPECT_EQ(prof.comments[0].id.value, "c1");
  EXPECT_FEEDSIM_ERROR(actor_profile(s, ActorId{"ghost"}), ErrorCode::UnknownActor);
}

TEST(FeedProperties, RandomStreamsMatchBruteForceOracle) {
  std::mt19937 rng(777);
  for (int trial = 0; trial < 60; ++trial) {
    const auto events = random_events(rng, 200);
    FeedState s = base_state();
    Oracle oracle;
    for (const auto& e : events) {
      s = apply_event(s, e);
      oracle.feed(e);
    }
    ASSERT_EQ(feed_order(s), oracle.feed_order()) << "trial " << trial;
    for (const char* a : {"amy", "tina"}) {
      for (std::size_t max : {std::size_t{5}, std::size_t{30}, std::size_t{1000}})
        ASSERT_EQ(build_actor_context(s, ActorId{a}, max), oracle.context(s, Party::actor(ActorId{a}), max))
            << "trial " << trial << " actor " << a << " max " << max;
    }
    // canonical JSON is lossless
    ASSERT_EQ(feed_state_from_json(canonical_json(s)), s);
  }
}

TEST(FeedProperties, InitFeedSeedsScenarioContent) {
  const auto& spec = shipped_scenario("reckless_doxxing");
  auto s = init_feed(spec, {{ParticipantId{"alex"}, "alex"}});
  EXPECT_EQ(s.actors.size(), spec.actors.size());
  EXPECT_EQ(s.posts.size(), spec.initial_posts.size());
  EXPECT_EQ(s.comments.size(), spec.initial_comments.size());
  EXPECT_EQ(visible_feed(s, kAlex).at(0).post.body, "Caught in the act! This is what happens when you let loose!");
}
