#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "feedsim/event_log.hpp"
#include "feedsim/events.hpp"

namespace feedsim {

/// Per-scenario research summary derived from the event log alone.
inline nlohmann::json summarize_session(const LogHeader& header, const std::vector<SessionEvent>& events) {
  using nlohmann::json;
  struct Run {
    unsigned number = 0;
    std::int64_t started_at = 0;
    std::string conclusion;
    json trajectory = json::array();
    json completions = json::array();
  };
  struct Scenario {
    std::string id;
    std::size_t index = 0;
    bool is_transfer = false;
    std::map<ActorId, Role> roles;
    std::vector<Run> runs;
    std::size_t hints = 0;
    std::size_t public_posts = 0;
    std::map<std::string, std::size_t> public_by_participant;
    std::map<std::string, std::size_t> dms_by_role;
    std::size_t agent_dms = 0;
    std::vector<std::string> fired;
  };
  std::vector<Scenario> scenarios;
  bool finished = false;

  auto start_run = [&](const ScenarioSetup& s, std::int64_t at, bool restart) {
    if (!restart || scenarios.empty() || scenarios.back().index != s.index) {
      Scenario sc;
      sc.id = s.scenario_id;
      sc.index = s.index;
      sc.is_transfer = s.is_transfer;
      scenarios.push_back(std::move(sc));
    }
    auto& sc = scenarios.back();
    for (const auto& a : s.actors) sc.roles[a.id] = a.role;
    Run run;
    run.number = static_cast<unsigned>(sc.runs.size() + 1);
    run.started_at = at;
    run.trajectory.push_back({{"at", at}, {"value", s.toxicity}});
    sc.runs.push_back(std::move(run));
  };

  for (const auto& e : events) {
    const auto at = e.at.count();
    if (auto x = e.as<ev::ScenarioStarted>()) start_run(x->setup, at, false);
    else if (auto x = e.as<ev::ScenarioRestarted>()) start_run(x->setup, at, true);
    else if (e.as<ev::SessionFinished>()) finished = true;
    if (scenarios.empty()) continue;
    auto& sc = scenarios.back();
    auto& run = sc.runs.back();
    if (auto x = e.as<ev::ToxicityChanged>()) {
      run.trajectory.push_back({{"at", at}, {"value", x->new_value}, {"cause", std::string(to_string(x->cause))}});
    } else if (auto x = e.as<ev::ChecklistItemCompleted>()) {
      run.completions.push_back({{"itemId", x->item_id}, {"at", at}, {"elapsedMs", at - run.started_at}});
    } else if (auto x = e.as<ev::ScenarioConcluded>()) {
      run.conclusion = std::string(to_string(x->reason));
    } else if (e.as<ev::HintIssued>()) {
      ++sc.hints;
    } else if (auto x = e.as<ev::TriggerFired>()) {
      sc.fired.push_back(x->rule_id);
    } else if (auto x = e.as<ev::CommentCreated>()) {
      if (!x->comment.author.is_actor()) {
        ++sc.public_posts;
        ++sc.public_by_participant[x->comment.author.id];
      }
    } else if (auto x = e.as<ev::DmSent>()) {
      if (!x->message.from.is_actor() && x->message.to.is_actor()) {
        auto role = sc.roles.find(x->message.to.actor_id());
        ++sc.dms_by_role[role == sc.roles.end() ? "Unknown" : std::string(to_string(role->second))];
      } else if (x->message.from.is_actor()) {
        ++sc.agent_dms;
      }
    }
  }

  json out = json::array();
  for (const auto& sc : scenarios) {
    json runs = json::array();
    for (const auto& r : sc.runs)
      runs.push_back({{"run", r.number},
                      {"startedAt", r.started_at},
                      {"conclusionReason", r.conclusion.empty() ? json(nullptr) : json(r.conclusion)},
                      {"toxicityTrajectory", r.trajectory},
                      {"checklistCompletions", r.completions}});
    const auto& last = sc.runs.back();
    out.push_back({{"scenarioId", sc.id},
                   {"index", sc.index},
                   {"isTransfer", sc.is_transfer},
                   {"runs", runs},
                   {"restarts", sc.runs.size() - 1},
                   {"conclusionReason", last.conclusion.empty() ? json(nullptr) : json(last.conclusion)},
                   {"toxicityTrajectory", last.trajectory},
                   {"checklistCompletions", last.completions},
                   {"hintCount", sc.hints},
                   {"publicPostCount", sc.public_posts},
                   {"publicPostCountByParticipant", sc.public_by_participant},
                   {"dmCountsByRole", sc.dms_by_role},
                   {"agentDmCount", sc.agent_dms},
                   {"firedRules", sc.fired}});
  }
  return {{"sessionId", header.session_id},
          {"packId", header.pack_id},
          {"packDigest", header.pack_digest},
          {"mode", header.mode},
          {"participants", header.participants},
          {"finished", finished},
          {"scenarios", out}};
}

}  // namespace feedsim
