#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "feedsim/engine.hpp"
#include "feedsim/error.hpp"
#include "feedsim/events.hpp"

namespace feedsim {

// File layout, one JSON object per line:
//   line 1      header      {"packDigest", "sessionId", "createdAt", ...}
//   event       {"seq", "at", "kind", "payload"}
//   checkpoint  {"checkpoint": {"seq", "stateHash"}}, written after every batch
// A batch is committed once its checkpoint line is on disk.

inline constexpr int kLogFormatVersion = 1;

struct LogHeader {
  std::string pack_digest;
  std::string session_id;
  SimTime created_at{0};
  std::string pack_id;
  std::string mode = "full";
  std::vector<Participant> participants;
  std::vector<std::string> scenario_order;  // scenario ids, in play order

  friend bool operator==(const LogHeader&, const LogHeader&) = default;
};

inline nlohmann::json header_json(const LogHeader& h) {
  return {{"packDigest", h.pack_digest}, {"sessionId", h.session_id},   {"createdAt", h.created_at.count()},
          {"packId", h.pack_id},         {"mode", h.mode},              {"participants", h.participants},
          {"scenarioOrder", h.scenario_order}, {"formatVersion", kLogFormatVersion}};
}

inline LogHeader header_from_json(const nlohmann::json& j) {
  try {
    LogHeader h;
    h.pack_digest = j.at("packDigest").get<std::string>();
    h.session_id = j.at("sessionId").get<std::string>();
    h.created_at = SimTime{j.at("createdAt").get<std::int64_t>()};
    h.pack_id = j.value("packId", "");
    h.mode = j.value("mode", "full");
    if (j.contains("participants")) h.participants = j.at("participants").get<std::vector<Participant>>();
    if (j.contains("scenarioOrder")) h.scenario_order = j.at("scenarioOrder").get<std::vector<std::string>>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedDocument, std::string("malformed log header: ") + e.what());
  }
}

struct Checkpoint {
  std::uint64_t seq = 0;
  std::string state_hash;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline std::string checkpoint_line(const Checkpoint& c) {
  return nlohmann::json{{"checkpoint", {{"seq", c.seq}, {"stateHash", c.state_hash}}}}.dump();
}

inline std::string event_line(const SessionEvent& e) { return event_json(e).dump(); }

/// Append-only writer; every batch is written with one write() and fsynced.
class EventLogWriter {
 public:
  EventLogWriter() = default;
  explicit EventLogWriter(const std::string& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) fail(ErrorCode::IoError, "cannot open log '" + path + "': " + std::strerror(errno));
  }
  EventLogWriter(const EventLogWriter&) = delete;
  EventLogWriter& operator=(const EventLogWriter&) = delete;
  EventLogWriter(EventLogWriter&& o) noexcept : path_(std::move(o.path_)), fd_(o.fd_) { o.fd_ = -1; }
  EventLogWriter& operator=(EventLogWriter&& o) noexcept {
    if (this != &o) {
      close();
      path_ = std::move(o.path_);
      fd_ = o.fd_;
      o.fd_ = -1;
    }
    return *this;
  }
  ~EventLogWriter() { close(); }

  bool is_open() const { return fd_ >= 0; }
  const std::string& path() const { return path_; }

  void write_header(const LogHeader& h) { write_all(header_json(h).dump() + "\n"); }
  void write_raw(const std::string& text) { write_all(text); }

  void append_batch(const std::vector<SessionEvent>& events, const Checkpoint& cp) {
    std::string buf;
    for (const auto& e : events) buf += event_line(e) + "\n";
    buf += checkpoint_line(cp) + "\n";
    write_all(buf);
  }

 private:
  void write_all(const std::string& buf) {
    if (fd_ < 0) return;
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
      ssize_t n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::IoError, "write to '" + path_ + "' failed: " + std::strerror(errno));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) fail(ErrorCode::IoError, "fsync of '" + path_ + "' failed: " + std::strerror(errno));
  }
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::string path_;
  int fd_ = -1;
};

struct LogRecord {
  enum class Kind { Event, Checkpoint };
  Kind kind = Kind::Event;
  SessionEvent event;
  Checkpoint checkpoint;
  std::size_t line = 0;
};

struct LogContents {
  LogHeader header;
  std::vector<LogRecord> records;
  bool torn_tail = false;  // final line was incomplete and has been dropped

  std::vector<SessionEvent> events() const {
    std::vector<SessionEvent> out;
    for (const auto& r : records)
      if (r.kind == LogRecord::Kind::Event) out.push_back(r.event);
    return out;
  }
  /// Events covered by the last checkpoint; later ones belong to a batch that
  /// never committed.
  std::vector<SessionEvent> committed_events() const {
    std::size_t last_cp = 0;
    bool any = false;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].kind == LogRecord::Kind::Checkpoint) last_cp = i, any = true;
    std::vector<SessionEvent> out;
    if (!any) return out;
    for (std::size_t i = 0; i < last_cp; ++i)
      if (records[i].kind == LogRecord::Kind::Event) out.push_back(records[i].event);
    return out;
  }
};

inline LogContents parse_log(const std::string& text) {
  LogContents out;
  std::size_t pos = 0, line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    const bool complete = nl != std::string::npos;
    std::string line = text.substr(pos, complete ? nl - pos : std::string::npos);
    pos = complete ? nl + 1 : text.size();
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      if (!complete) {
        out.torn_tail = true;
        break;
      }
      fail(ErrorCode::MalformedDocument, "log line " + std::to_string(line_no) + ": " + e.what(), {{"line", line_no}});
    }
    if (!have_header) {
      out.header = header_from_json(j);
      have_header = true;
      continue;
    }
    LogRecord r;
    r.line = line_no;
    if (j.contains("checkpoint")) {
      r.kind = LogRecord::Kind::Checkpoint;
      try {
        r.checkpoint = {j["checkpoint"].at("seq").get<std::uint64_t>(), j["checkpoint"].at("stateHash").get<std::string>()};
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::MalformedDocument, "log line " + std::to_string(line_no) + ": " + e.what(), {{"line", line_no}});
      }
    } else {
      r.event = event_from_json(j);
    }
    out.records.push_back(std::move(r));
  }
  if (!have_header) fail(ErrorCode::MalformedDocument, "log has no header line");
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LogContents read_log(const std::string& path) { return parse_log(read_file(path)); }

inline SessionState initial_session_state(const LogHeader& h) {
  SessionState s;
  for (const auto& p : h.participants) s.feed.participants.emplace(p.id, p);
  return s;
}

struct ReplayReport {
  SessionState state;
  std::string final_hash;
  std::size_t events = 0;
  std::size_t checkpoints = 0;
  std::size_t uncommitted = 0;  // events after the last checkpoint
  std::vector<std::string> mismatches;

  bool ok() const { return mismatches.empty() && checkpoints > 0; }
};

/// Re-derive state from events alone and compare with every checkpoint.
inline ReplayReport replay_log(const LogContents& log) {
  ReplayReport rep;
  rep.state = initial_session_state(log.header);
  std::size_t since_cp = 0;
  for (const auto& r : log.records) {
    if (r.kind == LogRecord::Kind::Event) {
      try {
        apply_event_in_place(rep.state, r.event);
      } catch (const Error& e) {
        rep.mismatches.push_back("line " + std::to_string(r.line) + ": " + std::string(to_string(e.code())) + ": " + e.what());
        return rep;
      }
      ++rep.events;
      ++since_cp;
      continue;
    }
    ++rep.checkpoints;
    since_cp = 0;
    const std::string hash = state_hash(rep.state);
    if (r.checkpoint.seq != rep.state.last_seq())
      rep.mismatches.push_back("line " + std::to_string(r.line) + ": checkpoint seq " + std::to_string(r.checkpoint.seq) +
                               " but replay is at seq " + std::to_string(rep.state.last_seq()));
    else if (r.checkpoint.state_hash != hash)
      rep.mismatches.push_back("line " + std::to_string(r.line) + ": state hash " + hash + " != recorded " +
                               r.checkpoint.state_hash);
    rep.final_hash = hash;
  }
  rep.uncommitted = since_cp;
  return rep;
}

}  // namespace feedsim
