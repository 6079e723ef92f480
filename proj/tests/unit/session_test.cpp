#include <gtest/gtest.h>

#include <functional>

#include "driver.hpp"
#include "feedsim/session.hpp"
#include "test_support.hpp"

using namespace feedsim;
using namespace feedsim::test;
using nlohmann::json;

namespace {

const Route kToAmy = Route::dm(ActorId{"amy_johnson"});
const Route kToTina = Route::dm(ActorId{"tina_chen"});
const Route kPost1 = Route::public_comment(PostId{"post-1"});

struct Reckless : ::testing::Test {
  Harness h;
  std::string sid;
  void SetUp() override {
    sid = h.create({"alex", "sam"});
    h.go_to(sid, scenario_index("reckless_doxxing"));
  }
  const ScenarioRuntime& runtime() { return (st_ = h.svc.state(sid))->runtime; }
  std::shared_ptr<const SessionState> st_;
};

bool has_key_anywhere(const json& j, const std::string& key) {
  if (j.is_object()) {
    if (j.contains(key)) return true;
    for (const auto& [k, v] : j.items())
      if (has_key_anywhere(v, key)) return true;
  } else if (j.is_array()) {
    for (const auto& v : j)
      if (has_key_anywhere(v, key)) return true;
  }
  return false;
}

}  // namespace

// ---- creation ------------------------------------------------------------------

TEST(SessionCreate, StartsTheFirstScenario) {
  Harness h;
  auto created = h.svc.create_session(h.pack_id, {"alex"});
  ASSERT_EQ(created.events.size(), 1u);
  EXPECT_TRUE(created.events[0].as<ev::ScenarioStarted>());
  EXPECT_EQ(created.events[0].seq, 1u);
  auto v = h.svc.view(created.session_id, "alex");
  EXPECT_EQ(v["scenario"]["id"], "intentional_hazing");
  EXPECT_EQ(v["scenario"]["count"], 8);
  EXPECT_EQ(v["scenario"]["remainingSeconds"], 480);
  EXPECT_EQ(v["toxicity"]["value"], 100);
  EXPECT_EQ(v["hintsRemaining"], 3);
  EXPECT_EQ(v["hints"], json::array());
  EXPECT_EQ(v["lastSeq"], 1);
  EXPECT_EQ(v["sessionStatus"], "Active");
}

TEST(SessionCreate, ParticipantNamesAreDisambiguated) {
  Harness h;
  auto created = h.svc.create_session(h.pack_id, {"alex", "alex", "amy_johnson", "amyoko_"});
  std::vector<std::string> ids;
  for (const auto& p : created.participants) ids.push_back(p.id.value);
  EXPECT_EQ(ids, (std::vector<std::string>{"alex", "alex_2", "amy_johnson_2", "amyoko__2"}));
}

TEST(SessionCreate, Errors) {
  Harness h;
  EXPECT_FEEDSIM_ERROR(h.svc.create_session(h.pack_id, {}), ErrorCode::EmptyParticipants);
  EXPECT_FEEDSIM_ERROR(h.svc.create_session("nope", {"a"}), ErrorCode::UnknownPack);
  EXPECT_FEEDSIM_ERROR(h.svc.create_session(h.pack_id, {" "}), ErrorCode::BadRequest);
  EXPECT_FEEDSIM_ERROR(h.svc.view("missing", "a"), ErrorCode::UnknownSession);
  EXPECT_FEEDSIM_ERROR(session_mode_from_string("sometimes"), ErrorCode::BadRequest);
}

TEST(SessionCreate, TrainingModeSkipsTransferScenarios) {
  Harness h;
  auto sid = h.create({"alex"}, SessionMode::Training);
  EXPECT_EQ(h.svc.header(sid).scenario_order.size(), 4u);
  EXPECT_EQ(h.svc.view(sid, "alex")["scenario"]["count"], 4);
  for (int i = 0; i < 4; ++i) h.svc.advance(sid, true);
  EXPECT_TRUE(h.svc.state(sid)->finished);
  EXPECT_EQ(h.svc.view(sid, "alex")["sessionStatus"], "Finished");
  EXPECT_FEEDSIM_ERROR(h.svc.advance(sid, true), ErrorCode::SessionFinished);
  EXPECT_FEEDSIM_ERROR(h.svc.submit_message(sid, "alex", Route::dm(ActorId{"kyle_vance"}), "hi"), ErrorCode::SessionFinished);
}

// ---- message pipeline ----------------------------------------------------------

TEST_F(Reckless, UnmatchedDmGetsVerdictAndReply) {
  auto events = h.svc.submit_message(sid, "alex", kToAmy, "hey");
  EXPECT_EQ(kinds(events), (std::vector<std::string>{"DmSent", "JudgeVerdictRecorded", "DmSent"}));
  const auto* first = events[0].as<ev::DmSent>();
  const auto* reply = events[2].as<ev::DmSent>();
  EXPECT_EQ(first->message.id.value, "m-" + std::to_string(events[0].seq));
  EXPECT_EQ(reply->message.from, Party::actor(ActorId{"amy_johnson"}));
  EXPECT_EQ(reply->message.to, Party::participant(ParticipantId{"alex"}));
  EXPECT_FALSE(reply->message.body.empty());
  EXPECT_EQ(events[1].as<ev::JudgeVerdictRecorded>()->message_id, first->message.id.value);
}

TEST_F(Reckless, ApologyPathOrdersEventsAndClearsWithTheChecklist) {
  auto e1 = h.svc.submit_message(sid, "alex", kToAmy, "why did you post that photo?");
  EXPECT_EQ(kinds(e1), (std::vector<std::string>{"DmSent", "JudgeVerdictRecorded", "ChecklistItemCompleted",
                                                 "ToxicityChanged", "DmSent"}));
  EXPECT_EQ(runtime().toxicity, 70);

  auto e2 = h.svc.submit_message(sid, "sam", kToTina, "is this doxing?");
  EXPECT_EQ(kinds(e2), (std::vector<std::string>{"DmSent", "JudgeVerdictRecorded", "TriggerFired", "DmSent",
                                                 "ChecklistItemCompleted", "ToxicityChanged"}));
  EXPECT_EQ(e2[2].as<ev::TriggerFired>()->rule_id, "informant_confirm");
  EXPECT_EQ(runtime().toxicity, 40);

  auto e3 = h.svc.submit_message(sid, "alex", kToAmy,
                                 "this is doxing and it can really hurt him, but I know you didn't mean it");
  EXPECT_EQ(kinds(e3), (std::vector<std::string>{"DmSent", "JudgeVerdictRecorded", "TriggerFired", "CommentCreated",
                                                 "PostDeleted", "ChecklistItemCompleted", "ChecklistItemCompleted",
                                                 "ToxicityChanged", "ToxicityChanged", "ScenarioConcluded", "DmSent"}));
  EXPECT_EQ(e3[2].as<ev::TriggerFired>()->rule_id, "apologize_and_delete");
  EXPECT_EQ(e3[9].as<ev::ScenarioConcluded>()->reason, ConclusionReason::Cleared);
  EXPECT_EQ(runtime().toxicity, 0);

  auto v = h.svc.view(sid, "sam");
  EXPECT_EQ(v["scenario"]["status"], "Concluded");
  EXPECT_EQ(v["scenario"]["conclusionReason"], "Cleared");
  EXPECT_FALSE(v["reflectionText"].get<std::string>().empty());
  for (const auto& item : v["checklist"]) EXPECT_TRUE(item["done"]) << item;
  EXPECT_FEEDSIM_ERROR(h.svc.restart(sid), ErrorCode::CannotRestartCleared);
  EXPECT_FEEDSIM_ERROR(h.svc.submit_message(sid, "alex", kToAmy, "hi"), ErrorCode::ScenarioConcluded);
  EXPECT_FEEDSIM_ERROR(h.svc.request_hint(sid), ErrorCode::ScenarioNotRunning);
  // the incident post is gone, the apology is on record in Amy's profile
  EXPECT_FEEDSIM_ERROR(h.svc.submit_message(sid, "alex", kPost1, "x"), ErrorCode::ScenarioConcluded);
  EXPECT_TRUE(h.svc.profile(sid, "amy_johnson")["posts"].empty());
  h.svc.advance(sid);
  EXPECT_EQ(h.svc.view(sid, "alex")["scenario"]["id"], "intentional_doxxing");
}

TEST_F(Reckless, AccusationEscalatesWithANewPost) {
  auto events = h.svc.submit_message(sid, "alex", kPost1, "you're a bully and you did this on purpose");
  std::vector<std::string> fired;
  for (const auto& e : events)
    if (auto x = e.as<ev::TriggerFired>()) fired.push_back(x->rule_id);
  EXPECT_EQ(fired, (std::vector<std::string>{"escalate", "victim_frustration"}));
  const auto& st = *h.svc.state(sid);
  ASSERT_TRUE(st.feed.posts.contains(PostId{"post-2"}));
  const auto& post2 = st.feed.posts.at(PostId{"post-2"});
  EXPECT_NE(post2.body.find("alex this one's for you"), std::string::npos);
  EXPECT_EQ(post2.author, Party::actor(ActorId{"amy_johnson"}));
  EXPECT_EQ(st.runtime.toxicity, 150);
  EXPECT_EQ(st.runtime.conclusion, ConclusionReason::Escalated);
  // the ridicule DM and the victim's frustration DM reach the author
  EXPECT_EQ(count_kind<ev::DmSent>(events), 2u);
  // restart resets the feed and the toxicity
  auto r = h.svc.restart(sid);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r[0].as<ev::ScenarioRestarted>());
  EXPECT_FALSE(h.svc.state(sid)->feed.posts.contains(PostId{"post-2"}));
  EXPECT_EQ(h.svc.state(sid)->runtime.toxicity, 100);
  EXPECT_EQ(h.svc.state(sid)->runtime.run, 2u);
}

TEST_F(Reckless, RuleReplyKeyUsedForReactiveDm) {
  // informant_confirm already DMs, so no extra reactive reply
  auto events = h.svc.submit_message(sid, "alex", kToTina, "does this count as doxing?");
  EXPECT_EQ(count_kind<ev::DmSent>(events), 2u);
}

TEST_F(Reckless, SupportiveCommentIsARally) {
  auto events = h.svc.submit_message(sid, "alex", kToTina, "can you help me say something to her?");
  std::vector<std::string> causes;
  for (const auto& e : events)
    if (auto x = e.as<ev::ToxicityChanged>()) causes.emplace_back(to_string(x->cause));
  EXPECT_EQ(causes, (std::vector<std::string>{"Rally"}));
  EXPECT_EQ(runtime().toxicity, 90);
  EXPECT_EQ(count_kind<ev::CommentCreated>(events), 1u);
}

TEST_F(Reckless, GuardsRejectBadInputWithoutSideEffects) {
  const auto before = h.svc.state(sid)->last_seq();
  EXPECT_FEEDSIM_ERROR(h.svc.submit_message(sid, "nobody", kToAmy, "hi"), ErrorCode::UnknownParticipant);
  EXPECT_FEEDSIM_ERROR(h.svc.submit_message(sid, "alex", kToAmy, "  \n"), ErrorCode::EmptyBody);
  EXPECT_FEEDSIM_ERROR(h.svc.submit_message(sid, "alex", Route::dm(ActorId{"marcus_reed"}), "hi"), ErrorCode::UnknownTarget);
  EXPECT_FEEDSIM_ERROR(h.svc.submit_message(sid, "alex", Route::public_comment(PostId{"post-9"}), "hi"), ErrorCode::UnknownTarget);
  EXPECT_FEEDSIM_ERROR(h.svc.advance(sid), ErrorCode::ScenarioStillRunning);
  EXPECT_FEEDSIM_ERROR(h.svc.view(sid, "nobody"), ErrorCode::UnknownParticipant);
  EXPECT_FEEDSIM_ERROR(h.svc.delete_comment(sid, "alex", "c-seed-1"), ErrorCode::UnknownTarget);
  EXPECT_FEEDSIM_ERROR(h.svc.react(sid, "alex", "post-9"), ErrorCode::UnknownTarget);
  EXPECT_EQ(h.svc.state(sid)->last_seq(), before);
}

TEST_F(Reckless, ParticipantsMayDeleteOnlyTheirOwnComments) {
  auto events = h.svc.submit_message(sid, "alex", kPost1, "hmm");
  const auto id = events[0].as<ev::CommentCreated>()->comment.id.value;
  EXPECT_FEEDSIM_ERROR(h.svc.delete_comment(sid, "sam", id), ErrorCode::UnknownTarget);
  auto del = h.svc.delete_comment(sid, "alex", id);
  ASSERT_EQ(del.size(), 1u);
  EXPECT_TRUE(del[0].as<ev::CommentDeleted>());
  EXPECT_FEEDSIM_ERROR(h.svc.delete_comment(sid, "alex", id), ErrorCode::UnknownTarget);
}

TEST_F(Reckless, ReactionsAreIdempotent) {
  EXPECT_EQ(h.svc.react(sid, "alex", "post-1").size(), 1u);
  EXPECT_TRUE(h.svc.react(sid, "alex", "post-1").empty());
  EXPECT_EQ(h.svc.view(sid, "sam")["feed"][0]["likeCount"], 1);
}

// ---- time ----------------------------------------------------------------------

TEST_F(Reckless, TimeoutAtTheDeadlineIsInclusive) {
  const auto started = h.svc.state(sid)->runtime.started_at;
  h.clock.set(SimTime{1'700'000'000'000} + started + SimTime{479'999});
  EXPECT_FALSE(h.svc.tick(sid));
  EXPECT_EQ(h.svc.view(sid, "alex")["scenario"]["remainingSeconds"], 1);
  h.clock.advance(SimTime{1});
  auto v = h.svc.view(sid, "alex");  // views apply due timeouts
  EXPECT_EQ(v["scenario"]["conclusionReason"], "Timeout");
  EXPECT_EQ(v["scenario"]["remainingSeconds"], 0);
  EXPECT_FALSE(h.svc.tick(sid));
  std::size_t timeouts = 0;
  for (const auto& e : h.svc.events(sid))
    if (auto c = e.as<ev::ScenarioConcluded>(); c && c->reason == ConclusionReason::Timeout) ++timeouts;
  EXPECT_EQ(timeouts, 1u);
  EXPECT_NO_THROW(h.svc.restart(sid));
}

TEST_F(Reckless, MessagesAfterTheDeadlineAreRejected) {
  h.clock.advance(SimTime{480'000});
  EXPECT_FEEDSIM_ERROR(h.svc.submit_message(sid, "alex", kToAmy, "hi"), ErrorCode::ScenarioConcluded);
  EXPECT_EQ(h.svc.state(sid)->runtime.conclusion, ConclusionReason::Timeout);
}

// ---- hints ---------------------------------------------------------------------

TEST(SessionHints, BudgetIsSessionWideAndRestartsDoNotRefund) {
  Harness h;
  auto sid = h.create();
  auto first = h.svc.request_hint(sid);
  EXPECT_EQ(first.text, shipped_scenario("intentional_hazing").hints[0]);
  EXPECT_EQ(first.events.at(0).as<ev::HintIssued>()->hint_id, "intentional_hazing/hint-1");
  h.svc.restart(sid);
  EXPECT_EQ(h.svc.view(sid, "alex")["hintsRemaining"], 2);
  EXPECT_EQ(h.svc.view(sid, "alex")["hints"].size(), 1u);  // disclosed hints stay visible
  auto second = h.svc.request_hint(sid);
  EXPECT_EQ(second.text, shipped_scenario("intentional_hazing").hints[1]);
  h.go_to(sid, scenario_index("reckless_doxxing"));
  EXPECT_EQ(h.svc.request_hint(sid).text, "Talk to a bystander; they might know");
  EXPECT_EQ(h.svc.view(sid, "alex")["hintsRemaining"], 0);
  EXPECT_FEEDSIM_ERROR(h.svc.request_hint(sid), ErrorCode::HintBudgetExhausted);
  h.svc.restart(sid);
  EXPECT_FEEDSIM_ERROR(h.svc.request_hint(sid), ErrorCode::HintBudgetExhausted);
  EXPECT_EQ(count_kind<ev::HintIssued>(h.svc.events(sid)), 3u);
}

// ---- transfer ------------------------------------------------------------------

TEST(SessionTransfer, ViewsCarryNoScaffoldingButAgentsStillReply) {
  Harness h;
  auto sid = h.create({"alex", "sam"});
  h.go_to(sid, 4);
  for (const char* who : {"alex", "sam"}) {
    auto v = h.svc.view(sid, who);
    EXPECT_TRUE(v["scenario"]["isTransfer"]);
    for (const char* key : {"checklist", "toxicity", "hints", "hintsRemaining"})
      EXPECT_FALSE(has_key_anywhere(v, key)) << key;
  }
  EXPECT_FEEDSIM_ERROR(h.svc.request_hint(sid), ErrorCode::TransferScenario);
  const auto& spec = h.svc.pack(h.pack_id)->pack.scenarios[4];
  for (const auto& a : spec.actors) {
    auto events = h.svc.submit_message(sid, "alex", Route::dm(a.actor.id), "hey, how are you?");
    ASSERT_FALSE(events.empty());
    EXPECT_TRUE(events.back().as<ev::DmSent>()) << a.actor.id.value;
    EXPECT_EQ(events.back().as<ev::DmSent>()->message.from, Party::actor(a.actor.id));
  }
}

// ---- properties ----------------------------------------------------------------

TEST(SessionProperties, RandomPlayKeepsConclusionAndChecklistInvariants) {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    Rig rig(shipped_pack(), seed);
    auto sid = rig.svc.create_session(rig.pack_id, {"alex", "sam"}).session_id;
    std::mt19937_64 rng(seed);
    std::map<std::string, bool> done;
    unsigned run = 0;
    std::string scenario;
    for (int i = 0; i < 80; ++i) {
      auto op = random_op(rng, *rig.svc.state(sid), rig.svc.header(sid).participants);
      apply_op(rig, sid, op);
      const auto st = rig.svc.state(sid);
      const auto& r = st->runtime;
      ASSERT_GE(r.toxicity, 0);
      ASSERT_LE(r.toxicity, 200);
      if (r.run != run || r.scenario_id != scenario) {
        run = r.run;
        scenario = r.scenario_id;
        done.clear();
      }
      for (const auto& [item, d] : r.checklist) {
        ASSERT_FALSE(done[item] && !d) << "checklist item " << item << " reverted after " << describe(op);
        done[item] = d;
      }
    }
    const auto msg = check_conclusions(rig.svc.events(sid), shipped_pack());
    ASSERT_TRUE(msg.empty()) << "seed " << seed << ": " << msg;
  }
}

TEST(SessionProperties, FailedOperationsLeaveNoTrace) {
  Rig rig(shipped_pack(), 3);
  auto sid = rig.svc.create_session(rig.pack_id, {"alex"}).session_id;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 150; ++i) {
    const auto before = rig.svc.state(sid);
    const auto before_events = rig.svc.events(sid).size();
    auto op = random_op(rng, *before, rig.svc.header(sid).participants);
    if (op.kind == Op::Tick) continue;
    const bool fails = apply_op(rig, sid, op).has_value();
    if (fails) {
      ASSERT_EQ(rig.svc.events(sid).size(), before_events) << describe(op);
      ASSERT_EQ(*rig.svc.state(sid), *before) << describe(op);
    }
  }
}

TEST(SessionSummary, CountsRunsHintsAndPosts) {
  Harness h;
  auto sid = h.create({"alex"});
  h.svc.request_hint(sid);
  h.svc.submit_message(sid, "alex", Route::public_comment(PostId{"intentional_hazing-post"}), "you're such a jerk");
  h.svc.restart(sid);
  h.svc.submit_message(sid, "alex", Route::dm(ActorId{"leo_park"}), "are you ok?");
  auto s = h.svc.export_summary(sid);
  EXPECT_EQ(s["sessionId"], sid);
  ASSERT_EQ(s["scenarios"].size(), 1u);
  const auto& sc = s["scenarios"][0];
  EXPECT_EQ(sc["restarts"], 1);
  EXPECT_EQ(sc["runs"][0]["conclusionReason"], "Escalated");
  EXPECT_TRUE(sc["conclusionReason"].is_null());
  EXPECT_EQ(sc["hintCount"], 1);
  EXPECT_EQ(sc["publicPostCount"], 1);
  EXPECT_EQ(sc["publicPostCountByParticipant"]["alex"], 1);
  EXPECT_EQ(sc["dmCountsByRole"]["Victim"], 1);
  EXPECT_GE(sc["agentDmCount"].get<int>(), 1);
  EXPECT_EQ(sc["toxicityTrajectory"][0]["value"], 100);
}
