#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "feedsim/agent.hpp"
#include "feedsim/event_log.hpp"
#include "feedsim/pack_io.hpp"
#include "feedsim/pipeline.hpp"
#include "feedsim/summary.hpp"
#include "feedsim/validate.hpp"
#include "feedsim/view.hpp"

namespace feedsim {

// ---- clocks ------------------------------------------------------------------

class Clock {
 public:
  virtual ~Clock() = default;
  virtual SimTime now() const = 0;
};

class SystemClock : public Clock {
 public:
  SimTime now() const override {
    return std::chrono::duration_cast<SimTime>(std::chrono::system_clock::now().time_since_epoch());
  }
};

class ManualClock : public Clock {
 public:
  explicit ManualClock(SimTime start = SimTime{0}) : ms_(start.count()) {}
  SimTime now() const override { return SimTime{ms_.load()}; }
  void set(SimTime t) { ms_.store(t.count()); }
  void advance(SimTime d) { ms_.fetch_add(d.count()); }

 private:
  std::atomic<std::int64_t> ms_;
};

// ---- packs -------------------------------------------------------------------

inline nlohmann::json diagnostic_json(const Diagnostic& d) {
  return {{"severity", d.severity == Severity::Error ? "error" : "warning"},
          {"code", d.code},
          {"path", d.path},
          {"message", d.message}};
}

inline nlohmann::json report_json(const ValidationReport& r) {
  nlohmann::json diags = nlohmann::json::array();
  for (const auto& d : r.diagnostics) diags.push_back(diagnostic_json(d));
  return {{"errors", r.error_count()}, {"warnings", r.warning_count()}, {"diagnostics", diags}};
}

/// A validated pack with its compiled scenarios. Never moved after creation,
/// since the compiled scenarios point into `pack`.
struct LoadedPack {
  ScenarioPack pack;
  std::vector<CompiledScenario> compiled;
  std::string digest;
  ValidationReport report;
};

inline std::shared_ptr<const LoadedPack> load_pack(ScenarioPack pack) {
  auto lp = std::make_shared<LoadedPack>();
  lp->pack = std::move(pack);
  lp->report = validate_pack(lp->pack);
  if (!lp->report.runnable())
    fail(ErrorCode::PackInvalid, "pack '" + lp->pack.pack_id + "' has " + std::to_string(lp->report.error_count()) + " error(s)",
         report_json(lp->report));
  for (const auto& s : lp->pack.scenarios) lp->compiled.emplace_back(s);
  lp->digest = pack_digest(lp->pack);
  return lp;
}

// ---- service -----------------------------------------------------------------

enum class SessionMode { Full, Training };

inline std::string_view to_string(SessionMode m) { return m == SessionMode::Full ? "full" : "training"; }

inline SessionMode session_mode_from_string(std::string_view s) {
  if (s == "full" || s == "Full") return SessionMode::Full;
  if (s == "training" || s == "Training") return SessionMode::Training;
  fail(ErrorCode::BadRequest, "mode must be 'full' or 'training'", {{"mode", s}});
}

struct ServiceOptions {
  std::string log_dir;  // empty: keep logs in memory only
  std::optional<std::uint64_t> seed;
  std::size_t max_context = kDefaultMaxContextEvents;
  std::optional<JudgeMode> judge_mode;  // overrides the pack setting
  std::string prompt_template = std::string(kDefaultPromptTemplate);
};

struct CreatedSession {
  std::string session_id;
  std::vector<Participant> participants;
  std::vector<SessionEvent> events;
};

struct HintResult {
  std::string text;
  std::vector<SessionEvent> events;
};

class SessionService {
 public:
  SessionService(const Clock& clock, std::shared_ptr<ChatBackend> backend, ServiceOptions opts = {})
      : clock_(clock), backend_(std::move(backend)), opts_(std::move(opts)), prompt_(opts_.prompt_template),
        rng_(opts_.seed ? *opts_.seed : std::random_device{}()) {
    if (!opts_.log_dir.empty()) std::filesystem::create_directories(opts_.log_dir);
  }

  // packs

  std::string add_pack(ScenarioPack pack) {
    auto lp = load_pack(std::move(pack));
    std::unique_lock lk(mu_);
    auto id = lp->pack.pack_id;
    packs_[id] = std::move(lp);
    return id;
  }

  std::shared_ptr<const LoadedPack> pack(const std::string& id) const {
    std::shared_lock lk(mu_);
    auto it = packs_.find(id);
    if (it == packs_.end()) fail(ErrorCode::UnknownPack, "unknown pack '" + id + "'", {{"packId", id}});
    return it->second;
  }

  nlohmann::json packs_json() const {
    std::shared_lock lk(mu_);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [id, lp] : packs_) {
      nlohmann::json scenarios = nlohmann::json::array();
      for (const auto& s : lp->pack.scenarios)
        scenarios.push_back({{"id", s.id}, {"title", s.title}, {"level", s.level}, {"isTransfer", s.is_transfer}});
      out.push_back({{"packId", id}, {"version", lp->pack.version}, {"digest", lp->digest},
                     {"warnings", lp->report.warning_count()}, {"scenarios", scenarios}});
    }
    return out;
  }

  // sessions

  CreatedSession create_session(const std::string& pack_id, const std::vector<std::string>& names,
                                SessionMode mode = SessionMode::Full) {
    auto lp = pack(pack_id);
    if (names.empty()) fail(ErrorCode::EmptyParticipants, "a session needs at least one participant");
    auto session = std::make_shared<Session>();
    session->pack = lp;
    session->header.pack_digest = lp->digest;
    session->header.pack_id = lp->pack.pack_id;
    session->header.mode = std::string(to_string(mode));
    session->header.created_at = clock_.now();
    session->header.participants = disambiguate(lp->pack, names);
    for (std::size_t i = 0; i < lp->pack.scenarios.size(); ++i) {
      const auto& s = lp->pack.scenarios[i];
      if (mode == SessionMode::Training && s.is_transfer) continue;
      session->header.scenario_order.push_back(s.id);
      session->order.push_back(i);
    }
    {
      std::lock_guard lk(rng_mu_);
      do session->header.session_id = random_id();
      while (has_session(session->header.session_id));
    }
    init_context(*session);
    session->state = std::make_shared<const SessionState>(initial_session_state(session->header));
    const std::string header_line = header_json(session->header).dump();
    session->lines.push_back(header_line);
    if (!opts_.log_dir.empty()) {
      session->writer = EventLogWriter(log_path(session->header.session_id));
      session->writer.write_header(session->header);
    }
    auto events = mutate(*session, [&](Transaction& tx) { start_session(session->ctx, tx); });
    {
      std::unique_lock lk(mu_);
      sessions_[session->header.session_id] = session;
    }
    return {session->header.session_id, session->header.participants, std::move(events)};
  }

  std::vector<SessionEvent> submit_message(const std::string& sid, const std::string& participant, const Route& route,
                                           const std::string& body) {
    auto s = session(sid);
    return mutate(*s, [&](Transaction& tx) { feedsim::submit_message(s->ctx, tx, ParticipantId{participant}, route, body); });
  }

  HintResult request_hint(const std::string& sid) {
    auto s = session(sid);
    std::string text;
    auto events = mutate(*s, [&](Transaction& tx) { text = feedsim::request_hint(s->ctx, tx); });
    return {std::move(text), std::move(events)};
  }

  std::vector<SessionEvent> restart(const std::string& sid) {
    auto s = session(sid);
    return mutate(*s, [&](Transaction& tx) { restart_scenario(s->ctx, tx); });
  }

  std::vector<SessionEvent> advance(const std::string& sid, bool manual = false) {
    auto s = session(sid);
    return mutate(*s, [&](Transaction& tx) { advance_scenario(s->ctx, tx, manual); });
  }

  std::vector<SessionEvent> react(const std::string& sid, const std::string& participant, const std::string& post) {
    auto s = session(sid);
    return mutate(*s, [&](Transaction& tx) { add_reaction(tx, ParticipantId{participant}, PostId{post}); });
  }

  std::vector<SessionEvent> delete_comment(const std::string& sid, const std::string& participant,
                                           const std::string& comment) {
    auto s = session(sid);
    return mutate(*s, [&](Transaction& tx) { delete_own_comment(tx, ParticipantId{participant}, CommentId{comment}); });
  }

  /// Apply any due timeout. Returns true when it concluded the scenario.
  bool tick(const std::string& sid) {
    auto s = session(sid);
    std::lock_guard lk(s->pipeline_mu);
    return tick_locked(*s);
  }

  nlohmann::json view(const std::string& sid, const std::string& participant) {
    auto s = session(sid);
    {
      std::unique_lock lk(s->pipeline_mu, std::try_to_lock);
      if (lk.owns_lock()) tick_locked(*s);
    }
    auto st = s->snapshot();
    if (!st->feed.participants.contains(ParticipantId{participant}))
      fail(ErrorCode::UnknownParticipant, "unknown participant '" + participant + "'", {{"participant", participant}});
    auto v = session_view_json(*st, s->ctx.scenario_at(st->runtime.index), s->order.size(), ParticipantId{participant},
                               sim_now(*s));
    v["sessionId"] = sid;
    return v;
  }

  nlohmann::json profile(const std::string& sid, const std::string& actor) {
    auto s = session(sid);
    auto st = s->snapshot();
    return profile_json(actor_profile(st->feed, ActorId{actor}));
  }

  std::shared_ptr<const SessionState> state(const std::string& sid) const { return session(sid)->snapshot(); }

  std::vector<SessionEvent> events(const std::string& sid) const {
    auto s = session(sid);
    std::lock_guard lk(s->snap_mu);
    return s->log;
  }

  /// Header, events and checkpoints, one JSON object per line.
  std::string export_events(const std::string& sid) const {
    auto s = session(sid);
    std::lock_guard lk(s->snap_mu);
    std::string out;
    for (const auto& l : s->lines) out += l + "\n";
    return out;
  }

  nlohmann::json export_summary(const std::string& sid) const {
    auto s = session(sid);
    std::lock_guard lk(s->snap_mu);
    return summarize_session(s->header, s->log);
  }

  LogHeader header(const std::string& sid) const { return session(sid)->header; }

  std::vector<std::string> session_ids() const {
    std::shared_lock lk(mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
  }

  /// Reload every session log in the log directory. Batches without a
  /// checkpoint never committed and are cut from the file. Returns the number
  /// of sessions restored; logs for unknown packs are skipped.
  std::size_t recover(std::vector<std::string>* problems = nullptr) {
    if (opts_.log_dir.empty()) return 0;
    std::size_t restored = 0;
    for (const auto& entry : std::filesystem::directory_iterator(opts_.log_dir)) {
      if (entry.path().extension() != ".jsonl") continue;
      try {
        if (restore(entry.path().string())) ++restored;
      } catch (const Error& e) {
        if (problems) problems->push_back(entry.path().string() + ": " + e.what());
      }
    }
    return restored;
  }

  const Clock& clock() const { return clock_; }

 private:
  struct Session {
    LogHeader header;
    std::shared_ptr<const LoadedPack> pack;
    std::vector<std::size_t> order;
    PipelineContext ctx;
    std::mutex pipeline_mu;  // serializes every mutation, backend calls included
    mutable std::mutex snap_mu;
    std::shared_ptr<const SessionState> state;
    std::vector<SessionEvent> log;
    std::vector<std::string> lines;
    EventLogWriter writer;

    std::shared_ptr<const SessionState> snapshot() const {
      std::lock_guard lk(snap_mu);
      return state;
    }
  };

  std::shared_ptr<Session> session(const std::string& sid) const {
    std::shared_lock lk(mu_);
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) fail(ErrorCode::UnknownSession, "unknown session '" + sid + "'", {{"sessionId", sid}});
    return it->second;
  }

  bool has_session(const std::string& sid) const {
    std::shared_lock lk(mu_);
    return sessions_.contains(sid);
  }

  std::string log_path(const std::string& sid) const { return (std::filesystem::path(opts_.log_dir) / (sid + ".jsonl")).string(); }

  std::string random_id() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id(16, '0');
    std::uint64_t x = rng_();
    for (int i = 15; i >= 0; --i, x >>= 4) id[static_cast<std::size_t>(i)] = kHex[x & 0xF];
    return id;
  }

  /// Ids are the requested names; repeats and clashes with actor ids or
  /// handles get a numeric suffix (_2, _3, ...).
  static std::vector<Participant> disambiguate(const ScenarioPack& pack, const std::vector<std::string>& names) {
    std::set<std::string> taken;
    for (const auto& s : pack.scenarios)
      for (const auto& a : s.actors) taken.insert(a.actor.id.value), taken.insert(a.actor.handle);
    std::vector<Participant> out;
    for (const auto& raw : names) {
      if (is_blank(raw)) fail(ErrorCode::BadRequest, "participant names must be non-empty");
      std::string id = raw;
      for (int k = 2; taken.contains(id); ++k) id = raw + "_" + std::to_string(k);
      taken.insert(id);
      out.push_back({ParticipantId{id}, id});
    }
    return out;
  }

  void init_context(Session& s) {
    s.ctx.pack = &s.pack->pack;
    s.ctx.compiled = &s.pack->compiled;
    s.ctx.order = s.order;
    s.ctx.backend = backend_.get();
    s.ctx.prompt = &prompt_;
    s.ctx.judge_mode = opts_.judge_mode.value_or(s.pack->pack.judge_mode);
    s.ctx.max_context = opts_.max_context;
  }

  SimTime sim_now(const Session& s) const { return clock_.now() - s.header.created_at; }

  void commit(Session& s, const Transaction& tx) {
    if (tx.events().empty()) return;
    const Checkpoint cp{tx.state().last_seq(), state_hash(tx.state())};
    if (s.writer.is_open()) s.writer.append_batch(tx.events(), cp);
    auto next = std::make_shared<const SessionState>(tx.state());
    std::lock_guard lk(s.snap_mu);
    for (const auto& e : tx.events()) s.lines.push_back(event_line(e));
    s.lines.push_back(checkpoint_line(cp));
    s.log.insert(s.log.end(), tx.events().begin(), tx.events().end());
    s.state = std::move(next);
  }

  bool tick_locked(Session& s) {
    Transaction t(*s.snapshot(), sim_now(s));
    if (!apply_tick(t)) return false;
    commit(s, t);
    return true;
  }

  template <typename F>
  std::vector<SessionEvent> mutate(Session& s, F&& f) {
    std::lock_guard lk(s.pipeline_mu);
    tick_locked(s);
    Transaction tx(*s.snapshot(), sim_now(s));
    f(tx);
    commit(s, tx);
    return tx.events();
  }

  bool restore(const std::string& path) {
    auto log = read_log(path);
    std::shared_ptr<const LoadedPack> lp;
    {
      std::shared_lock lk(mu_);
      for (const auto& [id, p] : packs_)
        if (p->digest == log.header.pack_digest) lp = p;
      if (sessions_.contains(log.header.session_id)) return false;
    }
    if (!lp) fail(ErrorCode::UnknownPack, "no loaded pack has digest " + log.header.pack_digest);

    // keep only committed batches
    std::size_t last_cp = 0;
    bool any_cp = false;
    for (std::size_t i = 0; i < log.records.size(); ++i)
      if (log.records[i].kind == LogRecord::Kind::Checkpoint) last_cp = i, any_cp = true;
    const bool cut = log.torn_tail || (any_cp ? last_cp + 1 != log.records.size() : !log.records.empty());
    log.records.resize(any_cp ? last_cp + 1 : 0);
    auto rep = replay_log(log);
    if (!rep.mismatches.empty()) fail(ErrorCode::ReplayMismatch, rep.mismatches.front());

    auto s = std::make_shared<Session>();
    s->header = log.header;
    s->pack = lp;
    for (const auto& id : log.header.scenario_order) {
      std::size_t i = 0;
      while (i < lp->pack.scenarios.size() && lp->pack.scenarios[i].id != id) ++i;
      if (i == lp->pack.scenarios.size()) fail(ErrorCode::UnknownPack, "pack lacks scenario '" + id + "'");
      s->order.push_back(i);
    }
    init_context(*s);
    s->lines.push_back(header_json(s->header).dump());
    for (const auto& r : log.records) {
      if (r.kind == LogRecord::Kind::Event) {
        s->log.push_back(r.event);
        s->lines.push_back(event_line(r.event));
      } else {
        s->lines.push_back(checkpoint_line(r.checkpoint));
      }
    }
    if (s->log.empty()) {
      Transaction tx(rep.state, sim_now(*s));
      start_session(s->ctx, tx);
      rep.state = tx.state();
      for (const auto& e : tx.events()) s->log.push_back(e), s->lines.push_back(event_line(e));
      s->lines.push_back(checkpoint_line({rep.state.last_seq(), state_hash(rep.state)}));
    }
    s->state = std::make_shared<const SessionState>(rep.state);
    if (cut || s->log.size() != rep.events) {
      std::string text;
      for (const auto& l : s->lines) text += l + "\n";
      const std::string tmp = path + ".tmp";
      std::filesystem::remove(tmp);
      EventLogWriter(tmp).write_raw(text);
      std::filesystem::rename(tmp, path);
    }
    s->writer = EventLogWriter(path);
    std::unique_lock lk(mu_);
    sessions_[s->header.session_id] = s;
    return true;
  }

  const Clock& clock_;
  std::shared_ptr<ChatBackend> backend_;
  ServiceOptions opts_;
  PromptTemplate prompt_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const LoadedPack>> packs_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

}  // namespace feedsim
