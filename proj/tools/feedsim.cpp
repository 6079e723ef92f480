// feedsim: pack tooling, server, replay and fixture generation.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "feedsim/event_log.hpp"
#include "feedsim/http_api.hpp"
#include "feedsim/json_source_map.hpp"
#include "feedsim/live_backend.hpp"
#include "feedsim/pack_io.hpp"
#include "feedsim/session.hpp"
#include "feedsim/summary.hpp"
#include "feedsim/validate.hpp"

using namespace feedsim;
using nlohmann::json;

namespace {

int cmd_lint(const std::string& file, bool as_json) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const Error& e) {
    std::cerr << file << ": " << e.what() << "\n";
    return 2;
  }
  auto parsed = parse_pack(text);
  json out = json::array();
  std::size_t errors = 0, warnings = 0;
  for (const auto& e : parsed.errors) {
    ++errors;
    if (as_json)
      out.push_back({{"severity", "error"}, {"code", std::string(to_string(e.code))}, {"path", e.path},
                     {"line", e.line}, {"column", e.column}, {"message", e.message}});
    else
      std::cout << file << ":" << e.line << ":" << e.column << ": error " << to_string(e.code) << " at "
                << (e.path.empty() ? "/" : e.path) << ": " << e.message << "\n";
  }
  if (parsed.ok()) {
    const auto map = JsonSourceMap::build(text);
    const auto report = validate_pack(*parsed.pack);
    for (const auto& d : report.diagnostics) {
      const auto pos = map.locate(text, d.path);
      const char* sev = d.severity == Severity::Error ? "error" : "warning";
      if (as_json)
        out.push_back({{"severity", sev}, {"code", d.code}, {"path", d.path}, {"line", pos.line},
                       {"column", pos.column}, {"message", d.message}});
      else
        std::cout << file << ":" << pos.line << ":" << pos.column << ": " << sev << " " << d.code << " at " << d.path
                  << ": " << d.message << "\n";
    }
    errors += report.error_count();
    warnings += report.warning_count();
  }
  if (as_json) std::cout << json{{"file", file}, {"errors", errors}, {"warnings", warnings}, {"diagnostics", out}}.dump(2) << "\n";
  else std::cout << file << ": " << errors << " error(s), " << warnings << " warning(s)\n";
  return errors == 0 ? 0 : 1;
}

int cmd_digest(const std::string& file) {
  try {
    std::cout << pack_digest(load_pack_file(file)) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n" << e.details().dump(2) << "\n";
    return 1;
  }
}

int cmd_replay(const std::string& file, const std::string& pack_file, bool quiet) {
  try {
    auto log = read_log(file);
    if (!pack_file.empty()) {
      const auto digest = pack_digest(load_pack_file(pack_file));
      if (digest != log.header.pack_digest) {
        std::cerr << "pack digest " << digest << " does not match log " << log.header.pack_digest << "\n";
        return 1;
      }
    }
    auto rep = replay_log(log);
    for (const auto& m : rep.mismatches) std::cerr << file << ": " << m << "\n";
    if (log.torn_tail) std::cerr << file << ": warning: incomplete final line ignored\n";
    if (rep.uncommitted) std::cerr << file << ": warning: " << rep.uncommitted << " event(s) after the last checkpoint\n";
    if (rep.checkpoints == 0) std::cerr << file << ": no checkpoint records\n";
    if (!quiet)
      std::cout << "session " << log.header.session_id << ": " << rep.events << " events, " << rep.checkpoints
                << " checkpoints, final state " << (rep.final_hash.empty() ? "-" : rep.final_hash) << " "
                << (rep.ok() ? "OK" : "MISMATCH") << "\n";
    return rep.ok() ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << file << ": " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
}

int cmd_summary(const std::string& file) {
  try {
    auto log = read_log(file);
    std::cout << summarize_session(log.header, log.committed_events()).dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << file << ": " << e.what() << "\n";
    return 1;
  }
}

/// Golden prompt fixtures: every actor, rendered with its fresh-scenario context.
int cmd_prompts(const std::string& pack_file, const std::string& out_dir) {
  try {
    const auto pack = load_pack_file(pack_file);
    std::filesystem::create_directories(out_dir);
    const PromptTemplate tpl;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pack.scenarios.size(); ++i) {
      const auto& s = pack.scenarios[i];
      SessionState st;
      apply_event_in_place(st, SessionEvent{1, SimTime{0}, ev::ScenarioStarted{make_setup(s, i, SimTime{0})}});
      for (const auto& a : s.actors) {
        const auto text = render_system_prompt(tpl, a.actor, build_actor_context(st.feed, a.actor.id));
        std::ofstream(std::filesystem::path(out_dir) / (s.id + "__" + a.actor.id.value + ".txt"), std::ios::binary) << text;
        ++n;
      }
    }
    std::cout << "wrote " << n << " prompt fixtures to " << out_dir << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

Route route_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "dm") return Route::dm(ActorId{j.at("actorId").get<std::string>()});
  return Route::public_comment(PostId{j.at("postId").get<std::string>()});
}

/// Drive a scripted session from a JSON script and write its log.
///   {"participants": [...], "mode": "full", "seed": 1,
///    "steps": [{"op": "message", "participant", "route", "body"}, {"op": "tick", "ms"},
///              {"op": "hint"}, {"op": "restart"}, {"op": "advance", "manual"},
///              {"op": "react", "participant", "postId"}, {"op": "deleteComment", "participant", "commentId"}]}
/// A step may carry "expectError": "<code>".
int cmd_simulate(const std::string& pack_file, const std::string& script_file, const std::string& log_file) {
  try {
    auto pack = load_pack_file(pack_file);
    const json script = json::parse(read_file(script_file));
    ManualClock clock(SimTime{script.value("startAt", std::int64_t{1'700'000'000'000})});
    auto backend = std::make_shared<ScriptedBackend>(pack);
    ServiceOptions opts;
    opts.seed = script.value("seed", std::uint64_t{1});
    SessionService svc(clock, backend, opts);
    const auto pack_id = svc.add_pack(std::move(pack));
    auto created = svc.create_session(pack_id, script.at("participants").get<std::vector<std::string>>(),
                                      session_mode_from_string(script.value("mode", "full")));
    const auto& sid = created.session_id;
    std::size_t step_no = 0;
    for (const auto& step : script.at("steps")) {
      ++step_no;
      const auto op = step.at("op").get<std::string>();
      const std::string expect = step.value("expectError", "");
      try {
        if (op == "message") {
          svc.submit_message(sid, step.at("participant"), route_from_json(step.at("route")), step.at("body"));
        } else if (op == "tick") {
          clock.advance(SimTime{step.at("ms").get<std::int64_t>()});
          svc.tick(sid);
        } else if (op == "hint") {
          svc.request_hint(sid);
        } else if (op == "restart") {
          svc.restart(sid);
        } else if (op == "advance") {
          svc.advance(sid, step.value("manual", false));
        } else if (op == "react") {
          svc.react(sid, step.at("participant"), step.at("postId"));
        } else if (op == "deleteComment") {
          svc.delete_comment(sid, step.at("participant"), step.at("commentId"));
        } else {
          std::cerr << "step " << step_no << ": unknown op '" << op << "'\n";
          return 1;
        }
        if (!expect.empty()) {
          std::cerr << "step " << step_no << ": expected " << expect << " but the step succeeded\n";
          return 1;
        }
      } catch (const Error& e) {
        if (expect != to_string(e.code())) {
          std::cerr << "step " << step_no << " (" << op << "): " << to_string(e.code()) << ": " << e.what() << "\n";
          return 1;
        }
      }
    }
    std::ofstream(log_file, std::ios::binary) << svc.export_events(sid);
    std::cout << "session " << sid << ": " << svc.state(sid)->last_seq() << " events, state "
              << state_hash(*svc.state(sid)) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::vector<std::string>& pack_files, const std::string& host, int port, bool scripted,
              const std::string& log_dir, const std::string& static_dir) {
  try {
    auto cfg = BackendConfig::from_env();
    std::vector<ScenarioPack> packs;
    for (const auto& f : pack_files) packs.push_back(load_pack_file(f));
    std::shared_ptr<ChatBackend> backend;
    if (scripted || !cfg.live()) {
      ScenarioPack merged;  // one reply table over all packs
      for (const auto& p : packs) merged.scenarios.insert(merged.scenarios.end(), p.scenarios.begin(), p.scenarios.end());
      backend = std::make_shared<ScriptedBackend>(merged);
      if (!scripted) std::cerr << "FEEDSIM_CHAT_ENDPOINT/FEEDSIM_CHAT_MODEL unset; using the scripted backend\n";
    } else {
      backend = std::make_shared<LiveBackend>(cfg);
    }
    static SystemClock clock;
    ServiceOptions opts;
    opts.log_dir = log_dir;
    opts.judge_mode = cfg.judge_mode;
    SessionService svc(clock, backend, opts);
    for (auto& p : packs) std::cerr << "loaded pack " << svc.add_pack(std::move(p)) << "\n";
    std::vector<std::string> problems;
    if (auto n = svc.recover(&problems)) std::cerr << "recovered " << n << " session(s) from " << log_dir << "\n";
    for (const auto& p : problems) std::cerr << "skipped " << p << "\n";

    httplib::Server server;
    mount_api(server, svc, {static_dir});
    g_server = &server;
    std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
    std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
    std::cerr << "listening on " << host << ":" << port << (scripted || !cfg.live() ? " (scripted)" : "") << "\n";
    if (!server.listen(host, port)) {
      std::cerr << "cannot listen on " << host << ":" << port << "\n";
      return 1;
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
    if (!e.details().empty()) std::cerr << e.details().dump(2) << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feedsim: social media bystander-training simulation"};
  app.require_subcommand(1);

  auto* pack = app.add_subcommand("pack", "scenario pack tools");
  pack->require_subcommand(1);
  std::string lint_file;
  bool lint_json = false;
  auto* lint = pack->add_subcommand("lint", "parse and validate a pack; exit 0 iff no errors");
  lint->add_option("file", lint_file, "pack file")->required();
  lint->add_flag("--json", lint_json, "machine-readable output");
  std::string digest_file;
  auto* digest = pack->add_subcommand("digest", "print the content digest of a pack");
  digest->add_option("file", digest_file, "pack file")->required();

  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  std::vector<std::string> serve_packs;
  std::string host = "127.0.0.1", log_dir, static_dir;
  int port = 8080;
  bool scripted = false;
  serve->add_option("--pack", serve_packs, "pack file (repeatable)")->required();
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "bind address");
  serve->add_flag("--scripted", scripted, "use canned replies and pattern judging");
  serve->add_option("--log-dir", log_dir, "directory for session logs");
  serve->add_option("--static", static_dir, "directory of UI assets served at /");

  auto* replay = app.add_subcommand("replay", "replay a session log; exit 0 iff every checkpoint matches");
  std::string replay_file, replay_pack;
  bool replay_quiet = false;
  replay->add_option("logfile", replay_file, "session log")->required();
  replay->add_option("--pack", replay_pack, "also check the log's pack digest against this file");
  replay->add_flag("-q,--quiet", replay_quiet, "no summary line");

  auto* summary = app.add_subcommand("summary", "print the research summary of a session log");
  std::string summary_file;
  summary->add_option("logfile", summary_file, "session log")->required();

  auto* simulate = app.add_subcommand("simulate", "run a scripted session and write its log");
  std::string sim_pack, sim_script, sim_log;
  simulate->add_option("--pack", sim_pack, "pack file")->required();
  simulate->add_option("--script", sim_script, "JSON step script")->required();
  simulate->add_option("--log", sim_log, "output log file")->required();

  auto* prompts = app.add_subcommand("prompts", "render every actor's fresh-scenario system prompt");
  std::string prompts_pack, prompts_out = "fixtures/prompts";
  prompts->add_option("--pack", prompts_pack, "pack file")->required();
  prompts->add_option("--out", prompts_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (lint->parsed()) return cmd_lint(lint_file, lint_json);
  if (digest->parsed()) return cmd_digest(digest_file);
  if (serve->parsed()) return cmd_serve(serve_packs, host, port, scripted, log_dir, static_dir);
  if (replay->parsed()) return cmd_replay(replay_file, replay_pack, replay_quiet);
  if (summary->parsed()) return cmd_summary(summary_file);
  if (simulate->parsed()) return cmd_simulate(sim_pack, sim_script, sim_log);
  if (prompts->parsed()) return cmd_prompts(prompts_pack, prompts_out);
  return 1;
}
