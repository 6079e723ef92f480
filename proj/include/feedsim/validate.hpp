#pragma once

#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "feedsim/expression.hpp"
#include "feedsim/pack.hpp"

namespace feedsim {

enum class Severity { Error, Warning };

/// One finding. `code` values are enumerated in docs/pack_schema.md.
struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  std::string path;  // JSON pointer into the pack document
  std::string message;
};

struct ValidationReport {
  std::vector<Diagnostic> diagnostics;

  std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& d : diagnostics) n += d.severity == Severity::Error;
    return n;
  }
  std::size_t warning_count() const { return diagnostics.size() - error_count(); }
  bool runnable() const { return error_count() == 0; }

  bool has(std::string_view code) const {
    for (const auto& d : diagnostics)
      if (d.code == code) return true;
    return false;
  }
};

inline constexpr std::string_view kParticipantPlaceholder = "{{participant}}";

/// Compile a scripted-judge pattern: POSIX extended syntax, case-insensitive.
inline std::regex compile_pattern(const std::string& pattern) {
  return std::regex(pattern, std::regex::extended | std::regex::icase | std::regex::nosubs);
}

namespace detail {

class PackValidator {
 public:
  explicit PackValidator(const ScenarioPack& pack) : pack_(pack) {}

  ValidationReport run() {
    if (pack_.pack_id.empty()) error("EmptyPackId", "/packId", "packId must be non-empty");
    toxicity(pack_.defaults, "/defaults");
    if (pack_.scenarios.empty()) error("NoScenarios", "/scenarios", "pack defines no scenarios");
    std::set<std::string> scenario_ids;
    bool seen_transfer = false;
    for (std::size_t i = 0; i < pack_.scenarios.size(); ++i) {
      const auto& s = pack_.scenarios[i];
      const std::string path = "/scenarios/" + std::to_string(i);
      if (!scenario_ids.insert(s.id).second)
        error("DuplicateScenarioId", path + "/id", "scenario id '" + s.id + "' is not unique");
      if (s.is_transfer) seen_transfer = true;
      else if (seen_transfer)
        warning("TransferBeforeTraining", path, "training scenario '" + s.id + "' is ordered after a transfer scenario");
      scenario(s, path);
    }
    return std::move(report_);
  }

 private:
  void error(std::string code, std::string path, std::string msg) {
    report_.diagnostics.push_back({Severity::Error, std::move(code), std::move(path), std::move(msg)});
  }
  void warning(std::string code, std::string path, std::string msg) {
    report_.diagnostics.push_back({Severity::Warning, std::move(code), std::move(path), std::move(msg)});
  }

  void toxicity(const ToxicityConfig& t, const std::string& path) {
    if (t.floor >= t.ceiling) error("InvalidToxicityBounds", path, "floor must be below ceiling");
    if (t.start_value < t.floor || t.start_value > t.ceiling)
      error("StartOutOfBounds", path + "/startValue", "startValue must lie within [floor, ceiling]");
    if (t.fail_threshold <= t.start_value)
      error("FailThresholdNotAboveStart", path + "/failThreshold", "failThreshold must exceed startValue");
    if (t.fail_threshold > t.ceiling)
      error("FailThresholdUnreachable", path + "/failThreshold", "failThreshold exceeds ceiling");
    if (t.checklist_delta == 0) error("ZeroDelta", path + "/checklistDelta", "delta must be nonzero");
    if (t.rally_delta == 0) error("ZeroDelta", path + "/rallyDelta", "delta must be nonzero");
    if (t.escalation_delta == 0) error("ZeroDelta", path + "/escalationDelta", "delta must be nonzero");
  }

  void spans(const std::vector<FlaggedSpan>& spans, std::size_t length, const std::string& path) {
    std::vector<FlaggedSpan> sorted = spans;
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (spans[i].start >= spans[i].end || spans[i].end > length)
        error("FlaggedSpanOutOfBounds", path + "/" + std::to_string(i),
              "span [" + std::to_string(spans[i].start) + ", " + std::to_string(spans[i].end) +
                  ") is empty or exceeds body length " + std::to_string(length));
    }
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i].start < sorted[i - 1].end) error("FlaggedSpansOverlap", path, "flagged spans overlap");
  }

  void scenario(const ScenarioSpec& s, const std::string& path) {
    if (s.id.empty()) error("EmptyScenarioId", path + "/id", "scenario id must be non-empty");
    if (s.level < 1 || s.level > 4) error("InvalidLevel", path + "/level", "level must be within 1..4");
    if (s.time_limit_seconds <= 0)
      error("NonPositiveTimeLimit", path + "/timeLimitSeconds", "timeLimitSeconds must be positive");
    if (s.reflection_text.empty()) warning("EmptyReflection", path + "/reflectionText", "no reflection text");
    toxicity(s.toxicity, path + "/toxicity");

    if (s.is_transfer && !s.hints.empty())
      warning("TransferScaffolding", path + "/hints", "transfer scenario carries hints; they are never shown");
    if (s.is_transfer && !s.checklist.empty())
      warning("TransferScaffolding", path + "/checklist", "transfer scenario carries checklist items; they are never shown");

    // actors
    std::set<ActorId> actor_ids;
    std::set<std::string> handles;
    for (std::size_t i = 0; i < s.actors.size(); ++i) {
      const auto& a = s.actors[i].actor;
      const std::string ap = path + "/actors/" + std::to_string(i);
      if (a.id.empty()) error("EmptyActorId", ap + "/id", "actor id must be non-empty");
      if (!actor_ids.insert(a.id).second) error("DuplicateActorId", ap + "/id", "actor id '" + a.id.value + "' is not unique");
      if (a.handle.empty()) error("EmptyHandle", ap + "/handle", "handle must be non-empty");
      else if (!handles.insert(a.handle).second)
        error("DuplicateHandle", ap + "/handle", "handle '" + a.handle + "' is not unique");
      if (a.behavior_prompt.empty()) error("EmptyBehaviorPrompt", ap + "/behaviorPrompt", "behaviorPrompt must be non-empty");
      if (a.behavior_prompt.find("${") != std::string::npos)
        error("PlaceholderInPrompt", ap + "/behaviorPrompt", "behaviorPrompt contains a '${' template token");
    }
    if (s.actors.empty()) error("NoActors", path + "/actors", "scenario defines no actors");

    // seeded content: posts and comments share one id namespace
    std::set<std::string> content_ids;
    std::set<std::string> post_ids;
    if (s.initial_posts.empty()) error("NoInitialPosts", path + "/initialPosts", "scenario needs an incident post");
    for (std::size_t i = 0; i < s.initial_posts.size(); ++i) {
      const auto& p = s.initial_posts[i];
      const std::string pp = path + "/initialPosts/" + std::to_string(i);
      if (!content_ids.insert(p.id.value).second) error("DuplicateContentId", pp + "/id", "id '" + p.id.value + "' is not unique");
      post_ids.insert(p.id.value);
      if (!actor_ids.contains(p.author.actor_id()))
        error("DanglingActor", pp + "/author", "unknown author '" + p.author.id + "'");
      spans(p.flagged_spans, codepoint_count(p.body), pp + "/flaggedSpans");
    }
    for (std::size_t i = 0; i < s.initial_comments.size(); ++i) {
      const auto& c = s.initial_comments[i];
      const std::string cp = path + "/initialComments/" + std::to_string(i);
      if (!content_ids.insert(c.id.value).second) error("DuplicateContentId", cp + "/id", "id '" + c.id.value + "' is not unique");
      if (!actor_ids.contains(c.author.actor_id()))
        error("DanglingActor", cp + "/author", "unknown author '" + c.author.id + "'");
      if (!post_ids.contains(c.post_id.value))
        error("DanglingPost", cp + "/postId", "unknown post '" + c.post_id.value + "'");
    }

    // predicates
    std::set<std::string> predicate_names;
    for (std::size_t i = 0; i < s.predicates.size(); ++i) {
      const auto& p = s.predicates[i];
      const std::string pp = path + "/predicates/" + std::to_string(i);
      if (p.name.empty() || !is_identifier(p.name))
        error("InvalidName", pp + "/name", "predicate name '" + p.name + "' is not an identifier");
      if (!predicate_names.insert(p.name).second)
        error("DuplicatePredicate", pp + "/name", "predicate '" + p.name + "' is defined twice");
      if (p.criterion.empty() && p.patterns.empty())
        error("PredicateWithoutCondition", pp, "predicate needs a criterion or at least one pattern");
      if (p.patterns.empty() && pack_.judge_mode == JudgeMode::Scripted)
        warning("NoPatternsForScriptedJudge", pp + "/patterns", "scripted judge can never set '" + p.name + "'");
      for (std::size_t k = 0; k < p.patterns.size(); ++k) {
        try {
          (void)compile_pattern(p.patterns[k]);
        } catch (const std::regex_error& e) {
          error("InvalidPattern", pp + "/patterns/" + std::to_string(k), "pattern does not compile: " + std::string(e.what()));
        }
      }
      if (p.applies_to.kind == AppliesTo::Kind::MessageToActor && !actor_ids.contains(p.applies_to.actor))
        error("DanglingActor", pp + "/appliesTo/actor", "unknown actor '" + p.applies_to.actor.value + "'");
    }

    // templates
    for (const auto& [name, body] : s.templates)
      if (body.empty()) error("EmptyTemplate", path + "/templates/" + name, "template '" + name + "' is empty");

    // rules
    std::set<std::string> rule_ids;
    std::set<std::string> known_posts = post_ids;
    for (std::size_t i = 0; i < s.trigger_rules.size(); ++i) {
      const auto& r = s.trigger_rules[i];
      const std::string rp = path + "/triggerRules/" + std::to_string(i);
      if (r.rule_id.empty() || !is_identifier(r.rule_id))
        error("InvalidName", rp + "/ruleId", "rule id '" + r.rule_id + "' is not an identifier");
      if (!rule_ids.insert(r.rule_id).second) error("DuplicateRuleId", rp + "/ruleId", "rule id '" + r.rule_id + "' is not unique");
      if (predicate_names.contains(r.rule_id))
        error("AmbiguousName", rp + "/ruleId", "rule id '" + r.rule_id + "' collides with a predicate name");
      if (!actor_ids.contains(r.target_actor))
        error("DanglingActor", rp + "/targetActor", "unknown actor '" + r.target_actor.value + "'");
      try {
        auto expr = Expression::parse(r.condition);
        for (const auto& name : expr.identifiers())
          if (!predicate_names.contains(name))
            error("DanglingPredicate", rp + "/condition", "condition references undefined predicate '" + name + "'");
      } catch (const Error& e) {
        error("InvalidExpression", rp + "/condition", e.what());
      }
      if (r.actions.empty()) warning("RuleWithoutActions", rp + "/actions", "rule has no actions");
      for (std::size_t k = 0; k < r.actions.size(); ++k) action(s, r, r.actions[k], rp + "/actions/" + std::to_string(k), known_posts, content_ids);
    }

    // checklist
    std::set<std::string> item_ids;
    for (std::size_t i = 0; i < s.checklist.size(); ++i) {
      const auto& c = s.checklist[i];
      const std::string cp = path + "/checklist/" + std::to_string(i);
      if (!item_ids.insert(c.item_id).second) error("DuplicateChecklistItem", cp + "/itemId", "item id '" + c.item_id + "' is not unique");
      if (c.label.empty()) error("EmptyLabel", cp + "/label", "checklist label must be non-empty");
      try {
        auto expr = Expression::parse(c.completion);
        for (const auto& name : expr.identifiers())
          if (!predicate_names.contains(name) && !rule_ids.contains(name))
            error("DanglingChecklistReference", cp + "/completion",
                  "completion references '" + name + "', which is neither a predicate nor a rule");
      } catch (const Error& e) {
        error("InvalidExpression", cp + "/completion", e.what());
      }
    }
  }

  void action(const ScenarioSpec& s, const TriggerRuleSpec& rule, const TriggerAction& a, const std::string& path,
              std::set<std::string>& known_posts, std::set<std::string>& content_ids) {
    switch (a.kind) {
      case ActionKind::DeletePost:
      case ActionKind::PublicApologyComment:
      case ActionKind::PostSupportiveComment:
        if (!known_posts.contains(a.post_ref))
          error("DanglingPost", path + "/postRef",
                "postRef '" + a.post_ref + "' is neither a seeded post nor created by an earlier action");
        break;
      case ActionKind::EscalateNewPost: {
        auto it = s.templates.find(a.body_template_ref);
        if (it == s.templates.end()) {
          error("DanglingTemplate", path + "/bodyTemplateRef", "unknown template '" + a.body_template_ref + "'");
        } else {
          const std::string& body = it->second;
          spans(a.flagged_spans, codepoint_count(body), path + "/flaggedSpans");
          auto ph = body.find(kParticipantPlaceholder);
          if (ph != std::string::npos) {
            std::size_t ph_cp = codepoint_count(std::string_view(body).substr(0, ph));
            for (const auto& sp : a.flagged_spans)
              if (sp.end > ph_cp)
                error("TemplateParticipantInSpan", path + "/flaggedSpans",
                      "flagged spans must end before the first participant placeholder");
          }
        }
        if (!a.post_id.empty()) {
          if (!rule.once_only)
            error("RepeatablePostId", path + "/postId", "a fixed postId needs a once-only rule");
          if (!content_ids.insert(a.post_id).second)
            error("DuplicateContentId", path + "/postId", "id '" + a.post_id + "' is not unique");
          known_posts.insert(a.post_id);
        }
        break;
      }
      case ActionKind::DmParticipant:
        if (a.tone_ref.empty()) error("EmptyToneRef", path + "/toneRef", "toneRef must be non-empty");
        break;
      case ActionKind::DmThanks:
      case ActionKind::DmFrustration:
        break;
    }
  }

  static bool is_identifier(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    static const std::set<std::string> kKeywords{"AND", "OR", "NOT"};
    std::string upper;
    for (char c : s) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return !kKeywords.contains(upper);
  }

  const ScenarioPack& pack_;
  ValidationReport report_;
};

}  // namespace detail

inline ValidationReport validate_pack(const ScenarioPack& pack) { return detail::PackValidator(pack).run(); }

}  // namespace feedsim
