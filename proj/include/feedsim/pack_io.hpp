#pragma once

#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "feedsim/error.hpp"
#include "feedsim/json_source_map.hpp"
#include "feedsim/pack.hpp"
#include "feedsim/sha256.hpp"

namespace feedsim {

struct ParseError {
  ErrorCode code = ErrorCode::MalformedDocument;
  std::string path;  // JSON pointer
  std::size_t line = 1;
  std::size_t column = 1;
  std::string message;

  std::string to_string() const {
    return std::to_string(line) + ":" + std::to_string(column) + ": " + std::string(feedsim::to_string(code)) +
           " at " + (path.empty() ? "/" : path) + ": " + message;
  }
};

struct ParseResult {
  std::optional<ScenarioPack> pack;
  std::vector<ParseError> errors;

  bool ok() const noexcept { return pack.has_value() && errors.empty(); }
};

struct ParseOptions {
  bool strict = true;  // reject unknown fields
};

namespace detail {

using nlohmann::json;

class PackParser {
 public:
  PackParser(std::string_view text, ParseOptions opts) : text_(text), opts_(opts) {}

  ParseResult run() {
    ParseResult result;
    json doc;
    try {
      doc = json::parse(text_.begin(), text_.end());
    } catch (const json::parse_error& e) {
      auto pos = position_of(text_, e.byte > 0 ? e.byte - 1 : 0);
      result.errors.push_back({ErrorCode::MalformedDocument, "", pos.line, pos.column, e.what()});
      return result;
    }
    map_ = JsonSourceMap::build(text_);
    if (doc.is_null() && text_.find_first_not_of(" \t\r\n") == std::string_view::npos) doc = json::object();
    ScenarioPack pack = parse_pack(doc);
    result.errors = std::move(errors_);
    if (result.errors.empty()) result.pack = std::move(pack);
    return result;
  }

 private:
  void error(ErrorCode code, const std::string& path, std::string message) {
    auto pos = map_.locate(text_, path);
    errors_.push_back({code, path, pos.line, pos.column, std::move(message)});
  }

  // Typed accessor over one JSON object; tracks which keys were consumed so
  // strict mode can flag the rest.
  class Obj {
   public:
    Obj(PackParser& p, const json& j, std::string path) : p_(p), j_(j), path_(std::move(path)) {
      if (!j_.is_object()) {
        p_.error(ErrorCode::MalformedDocument, path_, "expected an object");
        valid_ = false;
      }
    }

    bool valid() const { return valid_; }
    std::string child(std::string_view key) const { return path_ + "/" + std::string(key); }

    const json* field(std::string_view key, bool required) {
      seen_.insert(std::string(key));
      if (!valid_) return nullptr;
      auto it = j_.find(key);
      if (it == j_.end()) {
        if (required) p_.error(ErrorCode::MissingRequiredField, child(key), "missing required field '" + std::string(key) + "'");
        return nullptr;
      }
      return &*it;
    }

    std::string str(std::string_view key, bool required, std::string fallback = {}) {
      const json* v = field(key, required);
      if (!v) return fallback;
      if (!v->is_string()) {
        p_.error(ErrorCode::MalformedDocument, child(key), "expected a string");
        return fallback;
      }
      return v->get<std::string>();
    }

    int integer(std::string_view key, bool required, int fallback) {
      const json* v = field(key, required);
      if (!v) return fallback;
      if (!v->is_number_integer()) {
        p_.error(ErrorCode::MalformedDocument, child(key), "expected an integer");
        return fallback;
      }
      return v->get<int>();
    }

    std::int64_t int64(std::string_view key, bool required, std::int64_t fallback) {
      const json* v = field(key, required);
      if (!v) return fallback;
      if (!v->is_number_integer()) {
        p_.error(ErrorCode::MalformedDocument, child(key), "expected an integer");
        return fallback;
      }
      return v->get<std::int64_t>();
    }

    bool boolean(std::string_view key, bool required, bool fallback) {
      const json* v = field(key, required);
      if (!v) return fallback;
      if (!v->is_boolean()) {
        p_.error(ErrorCode::MalformedDocument, child(key), "expected a boolean");
        return fallback;
      }
      return v->get<bool>();
    }

    std::vector<std::string> strings(std::string_view key, bool required) {
      std::vector<std::string> out;
      const json* v = field(key, required);
      if (!v) return out;
      if (!v->is_array()) {
        p_.error(ErrorCode::MalformedDocument, child(key), "expected an array of strings");
        return out;
      }
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_string()) {
          p_.error(ErrorCode::MalformedDocument, child(key) + "/" + std::to_string(i), "expected a string");
          continue;
        }
        out.push_back((*v)[i].get<std::string>());
      }
      return out;
    }

    std::map<std::string, std::string> string_map(std::string_view key, bool required) {
      std::map<std::string, std::string> out;
      const json* v = field(key, required);
      if (!v) return out;
      if (!v->is_object()) {
        p_.error(ErrorCode::MalformedDocument, child(key), "expected an object of strings");
        return out;
      }
      for (const auto& [k, val] : v->items()) {
        if (!val.is_string()) {
          p_.error(ErrorCode::MalformedDocument, child(key) + "/" + k, "expected a string");
          continue;
        }
        out.emplace(k, val.get<std::string>());
      }
      return out;
    }

    std::vector<FlaggedSpan> spans(std::string_view key) {
      std::vector<FlaggedSpan> out;
      const json* v = field(key, false);
      if (!v) return out;
      if (!v->is_array()) {
        p_.error(ErrorCode::MalformedDocument, child(key), "expected an array of [start, end] pairs");
        return out;
      }
      for (std::size_t i = 0; i < v->size(); ++i) {
        try {
          out.push_back((*v)[i].get<FlaggedSpan>());
        } catch (const Error& e) {
          p_.error(ErrorCode::MalformedDocument, child(key) + "/" + std::to_string(i), e.what());
        }
      }
      return out;
    }

    /// Iterate an array of objects; `fn(Obj&)` per element.
    template <typename Fn>
    void each(std::string_view key, bool required, Fn&& fn) {
      const json* v = field(key, required);
      if (!v) return;
      if (!v->is_array()) {
        p_.error(ErrorCode::MalformedDocument, child(key), "expected an array");
        return;
      }
      for (std::size_t i = 0; i < v->size(); ++i) {
        Obj element(p_, (*v)[i], child(key) + "/" + std::to_string(i));
        if (!element.valid()) continue;
        fn(element);
        element.finish();
      }
    }

    template <typename Fn>
    void nested(std::string_view key, bool required, Fn&& fn) {
      const json* v = field(key, required);
      if (!v) return;
      Obj inner(p_, *v, child(key));
      if (!inner.valid()) return;
      fn(inner);
      inner.finish();
    }

    void finish() {
      if (!valid_ || !p_.opts_.strict) return;
      for (const auto& [k, _] : j_.items()) {
        if (!seen_.contains(k)) p_.error(ErrorCode::UnknownField, child(k), "unknown field '" + k + "'");
      }
    }

   private:
    PackParser& p_;
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
    bool valid_ = true;
  };

  template <typename Enum, typename Names>
  Enum enum_value(Obj& o, std::string_view key, bool required, Enum fallback, const Names& names) {
    std::string s = o.str(key, required);
    if (s.empty() && !required) return fallback;
    if (s.empty()) return fallback;
    for (const auto& [name, value] : names)
      if (name == s) return value;
    error(ErrorCode::MalformedDocument, o.child(key), "unknown value '" + s + "'");
    return fallback;
  }

  ToxicityConfig toxicity(Obj& o, ToxicityConfig base) {
    base.start_value = o.integer("startValue", false, base.start_value);
    base.checklist_delta = o.integer("checklistDelta", false, base.checklist_delta);
    base.rally_delta = o.integer("rallyDelta", false, base.rally_delta);
    base.escalation_delta = o.integer("escalationDelta", false, base.escalation_delta);
    base.floor = o.integer("floor", false, base.floor);
    base.ceiling = o.integer("ceiling", false, base.ceiling);
    base.fail_threshold = o.integer("failThreshold", false, base.fail_threshold);
    return base;
  }

  ScenarioPack parse_pack(const json& doc) {
    ScenarioPack pack;
    Obj root(*this, doc, "");
    if (!root.valid()) return pack;
    pack.pack_id = root.str("packId", true);
    pack.version = root.str("version", true);
    pack.judge_mode = enum_value(root, "judgeMode", false, JudgeMode::Scripted,
                                 std::initializer_list<std::pair<std::string_view, JudgeMode>>{
                                     {"Scripted", JudgeMode::Scripted}, {"LlmJudge", JudgeMode::LlmJudge}});
    root.nested("defaults", false, [&](Obj& d) { pack.defaults = toxicity(d, ToxicityConfig{}); });
    root.each("scenarios", true, [&](Obj& s) { pack.scenarios.push_back(scenario(s, pack.defaults)); });
    root.finish();
    return pack;
  }

  ScenarioSpec scenario(Obj& o, const ToxicityConfig& defaults) {
    ScenarioSpec s;
    s.id = o.str("id", true);
    s.title = o.str("title", false);
    s.level = o.integer("level", true, 1);
    s.scenario_type = enum_value(o, "scenarioType", true, ScenarioType::RecklessDoxxing,
                                 std::initializer_list<std::pair<std::string_view, ScenarioType>>{
                                     {"IntentionalHazing", ScenarioType::IntentionalHazing},
                                     {"Cyberstalking", ScenarioType::Cyberstalking},
                                     {"RecklessDoxxing", ScenarioType::RecklessDoxxing},
                                     {"IntentionalDoxxing", ScenarioType::IntentionalDoxxing}});
    s.is_transfer = o.boolean("isTransfer", false, false);
    s.time_limit_seconds = o.integer("timeLimitSeconds", true, 480);
    s.toxicity = defaults;
    o.nested("toxicity", false, [&](Obj& t) { s.toxicity = toxicity(t, defaults); });
    o.each("actors", true, [&](Obj& a) {
      ActorSpec spec;
      spec.actor.id = ActorId{a.str("id", true)};
      spec.actor.handle = a.str("handle", true);
      spec.actor.display_name = a.str("displayName", true);
      spec.actor.role = enum_value(a, "role", true, Role::BystanderNeutral,
                                   std::initializer_list<std::pair<std::string_view, Role>>{
                                       {"Bully", Role::Bully},
                                       {"Victim", Role::Victim},
                                       {"BystanderNeutral", Role::BystanderNeutral},
                                       {"BystanderInformant", Role::BystanderInformant},
                                       {"BystanderHostile", Role::BystanderHostile}});
      spec.actor.behavior_prompt = a.str("behaviorPrompt", true);
      spec.actor.profile_bio = a.str("profileBio", false);
      spec.actor.avatar_ref = a.str("avatarRef", false);
      spec.scripted_replies = a.string_map("scriptedReplies", false);
      s.actors.push_back(std::move(spec));
    });
    o.each("initialPosts", true, [&](Obj& p) {
      FeedPost post;
      post.id = PostId{p.str("id", true)};
      post.author = Party::actor(ActorId{p.str("author", true)});
      post.body = p.str("body", true);
      if (std::string img = p.str("imageRef", false); !img.empty()) post.image_ref = img;
      post.flagged_spans = p.spans("flaggedSpans");
      post.created_at = SimTime{p.int64("createdAt", false, 0)};
      s.initial_posts.push_back(std::move(post));
    });
    o.each("initialComments", false, [&](Obj& c) {
      Comment comment;
      comment.id = CommentId{c.str("id", true)};
      comment.post_id = PostId{c.str("postId", true)};
      comment.author = Party::actor(ActorId{c.str("author", true)});
      comment.body = c.str("body", true);
      comment.created_at = SimTime{c.int64("createdAt", false, 0)};
      s.initial_comments.push_back(std::move(comment));
    });
    o.each("predicates", false, [&](Obj& p) {
      PredicateDef def;
      def.name = p.str("name", true);
      def.criterion = p.str("criterion", false);
      def.patterns = p.strings("patterns", false);
      p.nested("appliesTo", true, [&](Obj& a) {
        def.applies_to.kind = enum_value(a, "kind", true, AppliesTo::Kind::Any,
                                         std::initializer_list<std::pair<std::string_view, AppliesTo::Kind>>{
                                             {"MessageToActor", AppliesTo::Kind::MessageToActor},
                                             {"PublicComment", AppliesTo::Kind::PublicComment},
                                             {"Any", AppliesTo::Kind::Any}});
        def.applies_to.actor = ActorId{a.str("actor", def.applies_to.kind == AppliesTo::Kind::MessageToActor)};
      });
      s.predicates.push_back(std::move(def));
    });
    s.templates = o.string_map("templates", false);
    o.each("triggerRules", false, [&](Obj& r) {
      TriggerRuleSpec rule;
      rule.rule_id = r.str("ruleId", true);
      rule.target_actor = ActorId{r.str("targetActor", true)};
      rule.condition = r.str("condition", true);
      rule.once_only = r.boolean("onceOnly", false, true);
      r.each("actions", true, [&](Obj& a) { rule.actions.push_back(action(a)); });
      s.trigger_rules.push_back(std::move(rule));
    });
    o.each("checklist", false, [&](Obj& c) {
      s.checklist.push_back({c.str("itemId", true), c.str("label", true), c.str("completion", true)});
    });
    s.hints = o.strings("hints", false);
    s.reflection_text = o.str("reflectionText", true);
    return s;
  }

  TriggerAction action(Obj& a) {
    TriggerAction act;
    std::string kind = a.str("kind", true);
    if (auto k = action_kind_from_string(kind)) {
      act.kind = *k;
    } else if (!kind.empty()) {
      error(ErrorCode::MalformedDocument, a.child("kind"), "unknown action kind '" + kind + "'");
    }
    switch (act.kind) {
      case ActionKind::DeletePost:
      case ActionKind::PublicApologyComment:
      case ActionKind::PostSupportiveComment:
        act.post_ref = a.str("postRef", true);
        break;
      case ActionKind::EscalateNewPost:
        act.body_template_ref = a.str("bodyTemplateRef", true);
        act.flagged_spans = a.spans("flaggedSpans");
        act.post_id = a.str("postId", false);
        act.image_ref = a.str("imageRef", false);
        break;
      case ActionKind::DmParticipant:
        act.tone_ref = a.str("toneRef", true);
        break;
      case ActionKind::DmThanks:
      case ActionKind::DmFrustration:
        break;
    }
    return act;
  }

  std::string_view text_;
  ParseOptions opts_;
  JsonSourceMap map_;
  std::vector<ParseError> errors_;
};

}  // namespace detail

inline ParseResult parse_pack(std::string_view document, ParseOptions opts = {}) {
  return detail::PackParser(document, opts).run();
}

inline ParseResult parse_pack_file(const std::string& path, ParseOptions opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParseResult r;
    r.errors.push_back({ErrorCode::IoError, "", 1, 1, "cannot open '" + path + "'"});
    return r;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pack(ss.str(), opts);
}

/// Load a pack or throw Error(PackInvalid) listing every parse error.
inline ScenarioPack load_pack_file(const std::string& path) {
  auto r = parse_pack_file(path);
  if (!r.ok()) {
    nlohmann::json errs = nlohmann::json::array();
    for (const auto& e : r.errors) errs.push_back(e.to_string());
    fail(ErrorCode::PackInvalid, "cannot parse pack '" + path + "'", {{"errors", errs}});
  }
  return std::move(*r.pack);
}

// ---- serialization ------------------------------------------------------------

inline nlohmann::json toxicity_json(const ToxicityConfig& t) {
  return {{"startValue", t.start_value},       {"checklistDelta", t.checklist_delta},
          {"rallyDelta", t.rally_delta},       {"escalationDelta", t.escalation_delta},
          {"floor", t.floor},                  {"ceiling", t.ceiling},
          {"failThreshold", t.fail_threshold}};
}

inline nlohmann::json action_json(const TriggerAction& a) {
  nlohmann::json j{{"kind", std::string(to_string(a.kind))}};
  switch (a.kind) {
    case ActionKind::DeletePost:
    case ActionKind::PublicApologyComment:
    case ActionKind::PostSupportiveComment:
      j["postRef"] = a.post_ref;
      break;
    case ActionKind::EscalateNewPost:
      j["bodyTemplateRef"] = a.body_template_ref;
      j["flaggedSpans"] = a.flagged_spans;
      if (!a.post_id.empty()) j["postId"] = a.post_id;
      if (!a.image_ref.empty()) j["imageRef"] = a.image_ref;
      break;
    case ActionKind::DmParticipant:
      j["toneRef"] = a.tone_ref;
      break;
    case ActionKind::DmThanks:
    case ActionKind::DmFrustration:
      break;
  }
  return j;
}

inline nlohmann::json scenario_json(const ScenarioSpec& s) {
  using nlohmann::json;
  json j;
  j["id"] = s.id;
  if (!s.title.empty()) j["title"] = s.title;
  j["level"] = s.level;
  j["scenarioType"] = std::string(to_string(s.scenario_type));
  j["isTransfer"] = s.is_transfer;
  j["timeLimitSeconds"] = s.time_limit_seconds;
  j["toxicity"] = toxicity_json(s.toxicity);
  j["actors"] = json::array();
  for (const auto& a : s.actors) {
    json aj{{"id", a.actor.id},
            {"handle", a.actor.handle},
            {"displayName", a.actor.display_name},
            {"role", a.actor.role},
            {"behaviorPrompt", a.actor.behavior_prompt},
            {"profileBio", a.actor.profile_bio},
            {"avatarRef", a.actor.avatar_ref}};
    if (!a.scripted_replies.empty()) aj["scriptedReplies"] = a.scripted_replies;
    j["actors"].push_back(std::move(aj));
  }
  j["initialPosts"] = json::array();
  for (const auto& p : s.initial_posts) {
    json pj{{"id", p.id}, {"author", p.author.id}, {"body", p.body}, {"flaggedSpans", p.flagged_spans},
            {"createdAt", p.created_at.count()}};
    if (p.image_ref) pj["imageRef"] = *p.image_ref;
    j["initialPosts"].push_back(std::move(pj));
  }
  j["initialComments"] = json::array();
  for (const auto& c : s.initial_comments)
    j["initialComments"].push_back(
        {{"id", c.id}, {"postId", c.post_id}, {"author", c.author.id}, {"body", c.body}, {"createdAt", c.created_at.count()}});
  j["predicates"] = json::array();
  for (const auto& p : s.predicates) {
    json applies{{"kind", std::string(to_string(p.applies_to.kind))}};
    if (p.applies_to.kind == AppliesTo::Kind::MessageToActor) applies["actor"] = p.applies_to.actor;
    json pj{{"name", p.name}, {"appliesTo", applies}};
    if (!p.criterion.empty()) pj["criterion"] = p.criterion;
    if (!p.patterns.empty()) pj["patterns"] = p.patterns;
    j["predicates"].push_back(std::move(pj));
  }
  j["templates"] = s.templates;
  j["triggerRules"] = json::array();
  for (const auto& r : s.trigger_rules) {
    json actions = json::array();
    for (const auto& a : r.actions) actions.push_back(action_json(a));
    j["triggerRules"].push_back({{"ruleId", r.rule_id},
                                 {"targetActor", r.target_actor},
                                 {"condition", r.condition},
                                 {"onceOnly", r.once_only},
                                 {"actions", actions}});
  }
  j["checklist"] = json::array();
  for (const auto& c : s.checklist)
    j["checklist"].push_back({{"itemId", c.item_id}, {"label", c.label}, {"completion", c.completion}});
  j["hints"] = s.hints;
  j["reflectionText"] = s.reflection_text;
  return j;
}

/// Fully materialized pack document; parse(serialize(p)) == p.
inline nlohmann::json serialize_pack(const ScenarioPack& pack) {
  nlohmann::json j;
  j["packId"] = pack.pack_id;
  j["version"] = pack.version;
  j["judgeMode"] = std::string(to_string(pack.judge_mode));
  j["defaults"] = toxicity_json(pack.defaults);
  j["scenarios"] = nlohmann::json::array();
  for (const auto& s : pack.scenarios) j["scenarios"].push_back(scenario_json(s));
  return j;
}

/// "sha256:<hex>" over the canonical (sorted-key, compact) serialization.
inline std::string pack_digest(const ScenarioPack& pack) {
  return "sha256:" + sha256_hex(serialize_pack(pack).dump());
}

}  // namespace feedsim
