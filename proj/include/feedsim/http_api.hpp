#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "feedsim/pack_io.hpp"
#include "feedsim/session.hpp"

namespace feedsim {

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownPack:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownParticipant:
    case ErrorCode::UnknownTarget:
    case ErrorCode::UnknownActor:
    case ErrorCode::UnknownViewer:
      return 404;
    case ErrorCode::ScenarioConcluded:
    case ErrorCode::ScenarioStillRunning:
    case ErrorCode::ScenarioNotRunning:
    case ErrorCode::SessionFinished:
    case ErrorCode::HintBudgetExhausted:
    case ErrorCode::TransferScenario:
    case ErrorCode::NoMoreHints:
    case ErrorCode::CannotRestartCleared:
      return 409;
    case ErrorCode::BadRequest:
    case ErrorCode::EmptyBody:
    case ErrorCode::EmptyParticipants:
    case ErrorCode::MalformedDocument:
    case ErrorCode::UnknownField:
    case ErrorCode::MissingRequiredField:
    case ErrorCode::InvalidExpression:
      return 400;
    case ErrorCode::PackInvalid:
      return 422;
    case ErrorCode::BackendUnavailable:
      return 503;
    default:
      return 500;
  }
}

/// Event as returned to participants: model rationales stay in the export.
inline nlohmann::json public_event_json(const SessionEvent& e) {
  auto j = event_json(e);
  if (e.as<ev::JudgeVerdictRecorded>()) j["payload"].erase("rationale");
  return j;
}

inline nlohmann::json events_response(const std::vector<SessionEvent>& events, std::uint64_t last_seq) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : events) arr.push_back(public_event_json(e));
  return {{"events", arr}, {"lastSeq", last_seq}};
}

struct ApiOptions {
  std::string static_dir;  // served at / when non-empty
};

namespace detail {

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) fail(ErrorCode::BadRequest, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::BadRequest, std::string("request body is not JSON: ") + e.what());
  }
}

inline std::string required_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string())
    fail(ErrorCode::BadRequest, std::string("field '") + key + "' must be a string", {{"field", key}});
  return j[key].get<std::string>();
}

inline void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json; charset=utf-8");
}

inline void send_error(httplib::Response& res, const Error& e) { send_json(res, e.to_json(), http_status(e.code())); }

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, Error(ErrorCode::BadRequest, e.what()));
    } catch (const std::exception& e) {
      send_error(res, Error(ErrorCode::Internal, e.what()));
    }
  };
}

inline Route parse_route(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::BadRequest, "route must be an object");
  const std::string kind = required_string(j, "kind");
  if (kind == "public_comment") return Route::public_comment(PostId{required_string(j, "postId")});
  if (kind == "dm") return Route::dm(ActorId{required_string(j, "actorId")});
  fail(ErrorCode::BadRequest, "route.kind must be 'public_comment' or 'dm'", {{"kind", kind}});
}

}  // namespace detail

/// Register every endpoint of the session API on `server`.
inline void mount_api(httplib::Server& server, SessionService& svc, const ApiOptions& opts = {}) {
  using detail::guarded;
  using detail::parse_body;
  using detail::required_string;
  using detail::send_json;
  using nlohmann::json;

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, {{"ok", true}}); });

  server.Get("/packs", guarded([&svc](const httplib::Request&, httplib::Response& res) {
               send_json(res, {{"packs", svc.packs_json()}});
             }));

  // Upload and lint. ?dryRun=true lints without registering.
  server.Post("/packs", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                auto parsed = parse_pack(req.body);
                if (!parsed.ok()) {
                  json errs = json::array();
                  for (const auto& e : parsed.errors)
                    errs.push_back({{"code", std::string(to_string(e.code))}, {"path", e.path}, {"line", e.line},
                                    {"column", e.column}, {"message", e.message}});
                  throw Error(ErrorCode::PackInvalid, "pack document does not parse", {{"parseErrors", errs}});
                }
                const auto report = validate_pack(*parsed.pack);
                if (!report.runnable())
                  throw Error(ErrorCode::PackInvalid, "pack has validation errors", report_json(report));
                const bool dry = req.get_param_value("dryRun") == "true";
                const std::string digest = pack_digest(*parsed.pack);
                std::string id = parsed.pack->pack_id;
                if (!dry) svc.add_pack(std::move(*parsed.pack));
                send_json(res, {{"packId", id}, {"digest", digest}, {"registered", !dry}, {"report", report_json(report)}},
                          dry ? 200 : 201);
              }));

  server.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                auto body = parse_body(req);
                const std::string pack_id = required_string(body, "packId");
                if (!body.contains("participants") || !body["participants"].is_array())
                  throw Error(ErrorCode::BadRequest, "field 'participants' must be an array of names");
                std::vector<std::string> names;
                for (const auto& n : body["participants"]) {
                  if (!n.is_string()) throw Error(ErrorCode::BadRequest, "participant names must be strings");
                  names.push_back(n.get<std::string>());
                }
                const auto mode = session_mode_from_string(body.value("mode", "full"));
                auto created = svc.create_session(pack_id, names, mode);
                json participants = json::array();
                for (const auto& p : created.participants)
                  participants.push_back({{"participantId", p.id}, {"displayName", p.display_name}});
                send_json(res,
                          {{"sessionId", created.session_id},
                           {"participants", participants},
                           {"lastSeq", svc.state(created.session_id)->last_seq()}},
                          201);
              }));

  server.Get("/sessions", guarded([&svc](const httplib::Request&, httplib::Response& res) {
               send_json(res, {{"sessions", svc.session_ids()}});
             }));

  server.Get(R"(/sessions/([^/]+)/view)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               if (!req.has_param("participant")) throw Error(ErrorCode::BadRequest, "query parameter 'participant' is required");
               send_json(res, svc.view(req.matches[1], req.get_param_value("participant")));
             }));

  server.Post(R"(/sessions/([^/]+)/messages)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                auto body = parse_body(req);
                const std::string sid = req.matches[1];
                const std::string participant = required_string(body, "participant");
                if (!body.contains("route")) throw Error(ErrorCode::BadRequest, "field 'route' is required");
                const Route route = detail::parse_route(body["route"]);
                const std::string text = body.contains("body") && body["body"].is_string() ? body["body"].get<std::string>() : "";
                auto events = svc.submit_message(sid, participant, route, text);
                send_json(res, events_response(events, svc.state(sid)->last_seq()));
              }));

  server.Post(R"(/sessions/([^/]+)/hints)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const std::string sid = req.matches[1];
                auto r = svc.request_hint(sid);
                auto out = events_response(r.events, svc.state(sid)->last_seq());
                const auto* issued = r.events.empty() ? nullptr : r.events.back().as<ev::HintIssued>();
                out["hint"] = {{"id", issued ? issued->hint_id : ""}, {"text", r.text}};
                out["hintsRemaining"] = std::max(0, kSessionHintBudget - svc.state(sid)->hints_used);
                send_json(res, out);
              }));

  server.Post(R"(/sessions/([^/]+)/restart)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const std::string sid = req.matches[1];
                auto events = svc.restart(sid);
                send_json(res, events_response(events, svc.state(sid)->last_seq()));
              }));

  server.Post(R"(/sessions/([^/]+)/advance)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                auto body = parse_body(req);
                const std::string sid = req.matches[1];
                const bool manual = body.contains("manual") && body["manual"].is_boolean() && body["manual"].get<bool>();
                auto events = svc.advance(sid, manual);
                send_json(res, events_response(events, svc.state(sid)->last_seq()));
              }));

  server.Post(R"(/sessions/([^/]+)/reactions)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                auto body = parse_body(req);
                const std::string sid = req.matches[1];
                auto events = svc.react(sid, required_string(body, "participant"), required_string(body, "postId"));
                send_json(res, events_response(events, svc.state(sid)->last_seq()));
              }));

  server.Delete(R"(/sessions/([^/]+)/comments/([^/]+))",
                guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                  if (!req.has_param("participant"))
                    throw Error(ErrorCode::BadRequest, "query parameter 'participant' is required");
                  const std::string sid = req.matches[1];
                  auto events = svc.delete_comment(sid, req.get_param_value("participant"), req.matches[2]);
                  send_json(res, events_response(events, svc.state(sid)->last_seq()));
                }));

  server.Get(R"(/sessions/([^/]+)/profiles/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               send_json(res, svc.profile(req.matches[1], req.matches[2]));
             }));

  server.Get(R"(/sessions/([^/]+)/export)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               const std::string sid = req.matches[1];
               const std::string format = req.has_param("format") ? req.get_param_value("format") : "events";
               if (format == "events") {
                 res.status = 200;
                 res.set_content(svc.export_events(sid), "application/x-ndjson; charset=utf-8");
               } else if (format == "summary") {
                 send_json(res, svc.export_summary(sid));
               } else {
                 throw Error(ErrorCode::BadRequest, "format must be 'events' or 'summary'", {{"format", format}});
               }
             }));

  if (!opts.static_dir.empty()) server.set_mount_point("/", opts.static_dir);
}

}  // namespace feedsim
