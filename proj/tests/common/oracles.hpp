#pragma once

// Independent reference models. None of these call into the engine's
// expression parser or trigger evaluator.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stack>
#include <string>
#include <vector>

namespace feedsim::oracle {

inline std::vector<std::string> tokens(const std::string& text) {
  std::string spaced;
  for (char c : text) {
    if (c == '(' || c == ')') spaced += std::string(" ") + c + " ";
    else spaced += c;
  }
  std::istringstream in(spaced);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline bool is_keyword(const std::string& t) {
  auto u = upper(t);
  return u == "AND" || u == "OR" || u == "NOT" || t == "(" || t == ")";
}

inline std::set<std::string> identifiers(const std::string& text) {
  std::set<std::string> out;
  for (const auto& t : tokens(text))
    if (!is_keyword(t)) out.insert(t);
  return out;
}

/// Shunting-yard to RPN, then a stack machine. Input is assumed well formed.
inline bool eval(const std::string& text, const std::map<std::string, bool>& env) {
  std::vector<std::string> out;
  std::stack<std::string> ops;
  auto prec = [](const std::string& op) { return op == "NOT" ? 3 : op == "AND" ? 2 : op == "OR" ? 1 : 0; };
  for (const auto& tok : tokens(text)) {
    const std::string up = upper(tok);
    if (up == "NOT") {
      ops.push(up);  // right-associative unary
    } else if (up == "AND" || up == "OR") {
      while (!ops.empty() && ops.top() != "(" && prec(ops.top()) >= prec(up)) out.push_back(ops.top()), ops.pop();
      ops.push(up);
    } else if (tok == "(") {
      ops.push(tok);
    } else if (tok == ")") {
      while (ops.top() != "(") out.push_back(ops.top()), ops.pop();
      ops.pop();
    } else {
      out.push_back("$" + tok);
    }
  }
  while (!ops.empty()) out.push_back(ops.top()), ops.pop();
  std::stack<bool> st;
  for (const auto& t : out) {
    if (t[0] == '$') {
      st.push(env.at(t.substr(1)));
    } else if (t == "NOT") {
      bool a = st.top();
      st.pop();
      st.push(!a);
    } else {
      bool b = st.top();
      st.pop();
      bool a = st.top();
      st.pop();
      st.push(t == "AND" ? (a && b) : (a || b));
    }
  }
  return st.top();
}

struct ToxicityModel {
  int start = 100, checklist = -30, rally = -10, escalation = 50, floor = 0, ceiling = 200, fail = 150;
};

/// 0 = ChecklistItem, 1 = Rally, 2 = Escalation.
inline int fold_toxicity(const ToxicityModel& m, const std::vector<int>& causes) {
  int v = m.start;
  for (int c : causes) {
    v += c == 0 ? m.checklist : c == 1 ? m.rally : m.escalation;
    v = std::min(std::max(v, m.floor), m.ceiling);
  }
  return v;
}

/// Outcome of a cause sequence when the scenario stops at the first
/// conclusion: 'C' cleared, 'E' escalated, 'R' still running.
inline char fold_outcome(const ToxicityModel& m, const std::vector<int>& causes, int* final_value = nullptr) {
  int v = m.start;
  char outcome = 'R';
  for (int c : causes) {
    v += c == 0 ? m.checklist : c == 1 ? m.rally : m.escalation;
    v = std::min(std::max(v, m.floor), m.ceiling);
    if (v <= m.floor) { outcome = 'C'; break; }
    if (v >= m.fail) { outcome = 'E'; break; }
  }
  if (final_value) *final_value = v;
  return outcome;
}

struct RuleModel {
  std::string id;
  std::string target;
  std::string condition;
  bool once_only = true;
};

/// Rules firing for one message: route filter, route-judged identifiers
/// only, onceOnly, condition true. `route_actor` empty means public comment.
inline std::vector<std::string> fired_rules(const std::vector<RuleModel>& rules, const std::map<std::string, bool>& env,
                                            const std::set<std::string>& judged, const std::set<std::string>& already,
                                            const std::string& route_actor) {
  std::vector<std::string> out;
  for (const auto& r : rules) {
    if (!route_actor.empty() && r.target != route_actor) continue;
    if (r.once_only && already.contains(r.id)) continue;
    bool all_judged = true;
    for (const auto& n : identifiers(r.condition)) all_judged = all_judged && judged.contains(n);
    if (!all_judged) continue;
    if (eval(r.condition, env)) out.push_back(r.id);
  }
  return out;
}

/// Context window: newest `max` items of the chronological list.
template <typename T>
std::vector<T> newest(std::vector<T> chronological, std::size_t max) {
  if (chronological.size() > max) chronological.erase(chronological.begin(), chronological.end() - static_cast<std::ptrdiff_t>(max));
  return chronological;
}

}  // namespace feedsim::oracle
