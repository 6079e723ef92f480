#include <gtest/gtest.h>

#include <filesystem>

#include "feedsim/agent.hpp"
#include "feedsim/reducer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace feedsim;
using namespace feedsim::test;

namespace {

Actor amy_johnson() {
  return Actor{ActorId{"amy_johnson"}, "amy_johnson", "Amy Johnson", Role::Bully, "You are Amy Johnson, a college student.", "", ""};
}

PredicateAssignment judge_public(const std::string& scenario, const std::string& text) {
  const auto& s = shipped_scenario(scenario);
  CompiledScenario compiled(s);
  ScriptedBackend backend;
  return judge_message(backend, JudgeMode::Scripted, compiled, "c-1", text, Route::public_comment(s.initial_posts[0].id))
      .assignment;
}

/// Backend that is always down, to exercise the judge fallback.
struct DownBackend : ChatBackend {
  std::string complete(const CompletionRequest&) override { fail(ErrorCode::BackendUnavailable, "down"); }
  JudgeResult judge(const JudgeRequest&) override { fail(ErrorCode::BackendUnavailable, "down"); }
};

/// Backend that records what it was asked.
struct RecordingBackend : ChatBackend {
  std::vector<CompletionRequest> requests;
  std::string reply = "sure";
  std::string complete(const CompletionRequest& r) override {
    requests.push_back(r);
    return reply;
  }
  JudgeResult judge(const JudgeRequest& r) override { return {r.text.find("yes") != std::string::npos, 0.9, "because"}; }
};

FeedState fresh_feed(const ScenarioSpec& s) {
  SessionState st;
  st.feed.participants.emplace(ParticipantId{"alex"}, Participant{ParticipantId{"alex"}, "alex"});
  apply_event_in_place(st, {1, SimTime{0}, ev::ScenarioStarted{make_setup(s, 0, SimTime{0})}});
  return st.feed;
}

}  // namespace

// ---- template ------------------------------------------------------------------

TEST(PromptTemplateTest, DefaultTemplateOpensWithTheHandle) {
  const PromptTemplate tpl;
  const auto text = render_system_prompt(tpl, amy_johnson(), {});
  EXPECT_EQ(text.rfind("You are now role-playing as amy_johnson:", 0), 0u) << text;
  EXPECT_NE(text.find("You are Amy Johnson, a college student. in a social media simulation like Instagram."),
            std::string::npos);
  EXPECT_EQ(text.find("${"), std::string::npos);
}

TEST(PromptTemplateTest, MissingSlotIsRejected) {
  EXPECT_FEEDSIM_ERROR(PromptTemplate("Hi ${otherUsername}, ${behavior}"), ErrorCode::MissingPlaceholder);
  EXPECT_FEEDSIM_ERROR(PromptTemplate(""), ErrorCode::MissingPlaceholder);
  EXPECT_NO_THROW(PromptTemplate("${actorContext}${behavior}${otherUsername}"));
}

TEST(PromptTemplateTest, SubstitutedValuesAreNotRescanned) {
  const PromptTemplate tpl("${otherUsername}|${behavior}|${actorContext}|${unknown}");
  EXPECT_EQ(tpl.render({{"otherUsername", "${behavior}"}, {"behavior", "b"}, {"actorContext", "c"}}),
            "${behavior}|b|c|${unknown}");
}

// ---- context -------------------------------------------------------------------

TEST(ActorContext, FortyEventsKeepTheNewestThirty) {
  FeedState s;
  s.actors.emplace(ActorId{"amy_johnson"}, amy_johnson());
  s.participants.emplace(ParticipantId{"alex"}, Participant{ParticipantId{"alex"}, "alex"});
  s = apply_event(s, {1, SimTime{0}, ev::PostCreated{{PostId{"p"}, Party::actor(ActorId{"amy_johnson"}), "post", {}, {}, SimTime{0}, 0, false}}});
  std::vector<std::string> expected{"[0] post amy_johnson: post"};
  for (std::uint64_t i = 2; i <= 40; ++i) {
    const std::string id = "c" + std::to_string(i);
    const std::int64_t at = static_cast<std::int64_t>(i) * 10;
    s = apply_event(s, {i, SimTime{at}, ev::CommentCreated{{CommentId{id}, PostId{"p"}, Party::participant(ParticipantId{"alex"}),
                                                            "msg " + id, SimTime{at}, 0, false}}});
    expected.push_back("[" + std::to_string(at) + "] comment alex: msg " + id);
  }
  const auto ctx = build_actor_context(s, ActorId{"amy_johnson"}, 30);
  EXPECT_EQ(ctx.size(), 30u);
  EXPECT_EQ(ctx, oracle::newest(expected, 30));
  EXPECT_EQ(build_actor_context(s, ActorId{"amy_johnson"}).size(), kDefaultMaxContextEvents);
}

TEST(ActorContext, DmsFromOtherThreadsAreInvisible) {
  const auto& sc = shipped_scenario("reckless_doxxing");
  auto s = fresh_feed(sc);
  const Party alex = Party::participant(ParticipantId{"alex"});
  s = apply_event(s, {2, SimTime{5}, ev::DmSent{{MessageId{"m-2"}, alex, Party::actor(ActorId{"tina_chen"}), "secret", SimTime{5}, 0}}});
  for (const auto& line : build_actor_context(s, ActorId{"amy_johnson"})) EXPECT_EQ(line.find("secret"), std::string::npos);
  const auto tina = build_actor_context(s, ActorId{"tina_chen"});
  ASSERT_FALSE(tina.empty());
  EXPECT_EQ(tina.back(), "[5] dm alex: secret");
}

// ---- golden prompts ------------------------------------------------------------

TEST(GoldenPrompts, FreshScenarioPromptsMatchFixturesByteForByte) {
  const PromptTemplate tpl;
  std::size_t checked = 0;
  for (const auto& s : shipped_pack().scenarios) {
    const auto feed = fresh_feed(s);
    for (const auto& a : s.actors) {
      const auto path = source_path("fixtures/prompts/" + s.id + "__" + a.actor.id.value + ".txt");
      ASSERT_TRUE(std::filesystem::exists(path)) << path;
      const auto rendered = render_system_prompt(tpl, a.actor, build_actor_context(feed, a.actor.id));
      EXPECT_EQ(rendered, read_file(path)) << path;
      EXPECT_NE(rendered.find("in a social media simulation like Instagram"), std::string::npos);
      EXPECT_EQ(rendered.rfind("You are now role-playing as " + a.actor.handle + ":\n", 0), 0u);
      EXPECT_EQ(rendered.find("${"), std::string::npos);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 32u);
}

TEST(GoldenPrompts, RecklessDoxxingPromptsCarryTheScenarioText) {
  const auto amy = read_file(source_path("fixtures/prompts/reckless_doxxing__amy_johnson.txt"));
  EXPECT_NE(amy.find("You are Amy Johnson, a college student. David Lee, Tina Chen, and you went to a party last night."),
            std::string::npos);
  EXPECT_NE(amy.find("You are now role-playing as amyoko_:"), std::string::npos);
  const auto david = read_file(source_path("fixtures/prompts/reckless_doxxing__david_lee.txt"));
  EXPECT_NE(david.find("You are David Lee, a college student."), std::string::npos);
}

// ---- judge ---------------------------------------------------------------------

TEST(ScriptedJudge, StatesHarmAndAcknowledgesNoIntent) {
  auto a = judge_public("reckless_doxxing", "this is doxing and it can really hurt him, but I know you didn't mean it");
  EXPECT_TRUE(a.at("states_doxing"));
  EXPECT_TRUE(a.at("acknowledges_no_intent"));
  EXPECT_FALSE(a.at("accuses_intentional"));
}

TEST(ScriptedJudge, AccusationIsDetected) {
  auto a = judge_public("reckless_doxxing", "you're a bully and you did this on purpose");
  EXPECT_TRUE(a.at("accuses_intentional"));
}

TEST(ScriptedJudge, EmptyMessageIsFalseEverywhere) {
  for (const char* text : {"", "   ", "\n\t"}) {
    auto a = judge_public("reckless_doxxing", text);
    EXPECT_EQ(a.size(), shipped_scenario("reckless_doxxing").predicates.size());
    for (const auto& [name, v] : a) EXPECT_FALSE(v) << name;
  }
}

TEST(ScriptedJudge, QuestionsAreNotStatements) {
  auto a = judge_public("reckless_doxxing", "is this doxing?");
  EXPECT_TRUE(a.at("asks_if_doxing"));
  EXPECT_FALSE(a.at("states_doxing"));
}

TEST(ScriptedJudge, DmOnlyJudgesRoutePredicates) {
  const auto& s = shipped_scenario("reckless_doxxing");
  CompiledScenario compiled(s);
  ScriptedBackend backend;
  auto v = judge_message(backend, JudgeMode::Scripted, compiled, "m-1", "why did you post that?", Route::dm(ActorId{"amy_johnson"}));
  EXPECT_TRUE(v.assignment.contains("asks_motive"));
  EXPECT_FALSE(v.assignment.contains("asks_if_doxing"));
  EXPECT_TRUE(v.assignment.at("asks_motive"));
  for (const auto& [name, src] : v.sources) EXPECT_EQ(src, VerdictSource::Pattern) << name;
}

TEST(ModelJudge, FallsBackToPatternsWhenTheBackendIsDown) {
  const auto& s = shipped_scenario("reckless_doxxing");
  CompiledScenario compiled(s);
  DownBackend down;
  auto v = judge_message(down, JudgeMode::LlmJudge, compiled, "c-1", "you did this on purpose",
                         Route::public_comment(PostId{"post-1"}));
  EXPECT_TRUE(v.assignment.at("accuses_intentional"));
  for (const auto& [name, src] : v.sources) EXPECT_EQ(src, VerdictSource::Fallback) << name;

  RecordingBackend up;
  auto w = judge_message(up, JudgeMode::LlmJudge, compiled, "c-1", "yes", Route::public_comment(PostId{"post-1"}));
  for (const auto& [name, value] : w.assignment) {
    EXPECT_TRUE(value);
    EXPECT_EQ(w.sources.at(name), VerdictSource::Model);
    EXPECT_EQ(w.rationale.at(name), "because");
  }
}

// ---- replies -------------------------------------------------------------------

TEST(ScriptedReplies, LookupFallsBackToDefaultThenGlobal) {
  ScriptedBackend b;
  b.set_line("amy", "default", "hey {{participant}}");
  b.set_line("amy", "apology", "sorry all");
  CompletionRequest r;
  r.actor_id = ActorId{"amy"};
  r.participant_name = "Riley";
  r.reply_key = "apology";
  EXPECT_EQ(b.complete(r), "sorry all");
  r.reply_key = "ridicule";
  EXPECT_EQ(b.complete(r), "hey Riley");
  r.actor_id = ActorId{"nobody"};
  EXPECT_EQ(b.complete(r), std::string(ScriptedBackend::kGlobalDefault));
}

TEST(ScriptedReplies, ShippedActorsAllHaveDefaultLines) {
  for (const auto& s : shipped_pack().scenarios)
    for (const auto& a : s.actors) EXPECT_TRUE(a.scripted_replies.contains("default")) << s.id << "/" << a.actor.id.value;
}

TEST(GenerateReply, SendsPromptTranscriptAndInstruction) {
  const auto& sc = shipped_scenario("reckless_doxxing");
  auto feed = fresh_feed(sc);
  const Party alex = Party::participant(ParticipantId{"alex"});
  const Party amy = Party::actor(ActorId{"amy_johnson"});
  feed = apply_event(feed, {2, SimTime{1}, ev::DmSent{{MessageId{"m-2"}, alex, amy, "hi", SimTime{1}, 0}}});
  feed = apply_event(feed, {3, SimTime{2}, ev::DmSent{{MessageId{"m-3"}, amy, alex, "hey", SimTime{2}, 0}}});
  RecordingBackend rec;
  const PromptTemplate tpl;
  EXPECT_EQ(generate_reply(rec, tpl, feed, {ActorId{"amy_johnson"}, ParticipantId{"alex"}, "apology", "Apologize."}), "sure");
  ASSERT_EQ(rec.requests.size(), 1u);
  const auto& req = rec.requests[0];
  EXPECT_EQ(req.system_prompt.rfind("You are now role-playing as amyoko_:", 0), 0u);
  ASSERT_EQ(req.messages.size(), 3u);
  EXPECT_EQ(req.messages[0], (ChatMessage{"user", "hi"}));
  EXPECT_EQ(req.messages[1], (ChatMessage{"assistant", "hey"}));
  EXPECT_EQ(req.messages[2], (ChatMessage{"user", "Apologize."}));
  EXPECT_EQ(req.reply_key, "apology");
  EXPECT_EQ(req.participant_name, "alex");

  rec.reply = "  ";
  EXPECT_FEEDSIM_ERROR(generate_reply(rec, tpl, feed, {ActorId{"amy_johnson"}, ParticipantId{"alex"}, "default", {}}), ErrorCode::BackendUnavailable);
  EXPECT_FEEDSIM_ERROR(generate_reply(rec, tpl, feed, {ActorId{"ghost"}, ParticipantId{"alex"}, "default", {}}), ErrorCode::UnknownActor);
}
