#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "feedsim/error.hpp"

namespace feedsim {

// Boolean condition over named facts:
//
//   expr    := and_expr ( "OR" and_expr )*
//   and_expr:= unary ( "AND" unary )*
//   unary   := "NOT" unary | "(" expr ")" | identifier
//
// Keywords are case-insensitive; identifiers are [A-Za-z_][A-Za-z0-9_]*.
class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view text) {
    Expression e;
    e.source_ = std::string(text);
    Parser p{text, e, {}, 0};
    p.tokenize();
    e.root_ = p.parse_or();
    if (p.pos != p.tokens.size())
      p.error("unexpected '" + p.tokens[p.pos].text + "'", p.tokens[p.pos].offset);
    return e;
  }

  template <typename Lookup>
  bool evaluate(const Lookup& lookup) const {
    return eval(root_, lookup);
  }

  /// Distinct identifiers in order of first appearance.
  const std::vector<std::string>& identifiers() const noexcept { return identifiers_; }
  const std::string& source() const noexcept { return source_; }
  bool empty() const noexcept { return nodes_.empty(); }

 private:
  struct Node {
    enum class Kind { Ident, Not, And, Or };
    Kind kind;
    int lhs = -1;
    int rhs = -1;
    std::string name;
  };

  struct Token {
    std::string text;
    std::size_t offset;
  };

  struct Parser {
    std::string_view text;
    Expression& out;
    std::vector<Token> tokens;
    std::size_t pos = 0;

    [[noreturn]] void error(const std::string& what, std::size_t offset) {
      fail(ErrorCode::InvalidExpression,
           "invalid expression '" + std::string(text) + "': " + what + " at offset " + std::to_string(offset),
           {{"offset", offset}});
    }

    void tokenize() {
      std::size_t i = 0;
      while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
          ++i;
        } else if (c == '(' || c == ')') {
          tokens.push_back({std::string(1, c), i});
          ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
          std::size_t start = i;
          while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) ++i;
          tokens.push_back({std::string(text.substr(start, i - start)), start});
        } else {
          error(std::string("unexpected character '") + c + "'", i);
        }
      }
      if (tokens.empty()) error("empty expression", 0);
    }

    static bool keyword(const Token& t, std::string_view kw) {
      return t.text.size() == kw.size() &&
             std::equal(t.text.begin(), t.text.end(), kw.begin(),
                        [](char a, char b) { return std::toupper(static_cast<unsigned char>(a)) == b; });
    }
    bool at_keyword(std::string_view kw) const { return pos < tokens.size() && keyword(tokens[pos], kw); }

    int push(Node n) {
      out.nodes_.push_back(std::move(n));
      return static_cast<int>(out.nodes_.size()) - 1;
    }

    int parse_or() {
      int lhs = parse_and();
      while (at_keyword("OR")) {
        ++pos;
        int rhs = parse_and();
        lhs = push({Node::Kind::Or, lhs, rhs, {}});
      }
      return lhs;
    }

    int parse_and() {
      int lhs = parse_unary();
      while (at_keyword("AND")) {
        ++pos;
        int rhs = parse_unary();
        lhs = push({Node::Kind::And, lhs, rhs, {}});
      }
      return lhs;
    }

    int parse_unary() {
      if (pos >= tokens.size()) error("unexpected end", text.size());
      const Token& t = tokens[pos];
      if (keyword(t, "NOT")) {
        ++pos;
        int operand = parse_unary();
        return push({Node::Kind::Not, operand, -1, {}});
      }
      if (t.text == "(") {
        ++pos;
        int inner = parse_or();
        if (pos >= tokens.size() || tokens[pos].text != ")") error("missing ')'", pos < tokens.size() ? tokens[pos].offset : text.size());
        ++pos;
        return inner;
      }
      if (t.text == ")" || keyword(t, "AND") || keyword(t, "OR")) error("unexpected '" + t.text + "'", t.offset);
      ++pos;
      if (std::find(out.identifiers_.begin(), out.identifiers_.end(), t.text) == out.identifiers_.end())
        out.identifiers_.push_back(t.text);
      return push({Node::Kind::Ident, -1, -1, t.text});
    }
  };

  template <typename Lookup>
  bool eval(int idx, const Lookup& lookup) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    switch (n.kind) {
      case Node::Kind::Ident: return lookup(n.name);
      case Node::Kind::Not: return !eval(n.lhs, lookup);
      case Node::Kind::And: return eval(n.lhs, lookup) && eval(n.rhs, lookup);
      case Node::Kind::Or: return eval(n.lhs, lookup) || eval(n.rhs, lookup);
    }
    return false;
  }

  std::string source_;
  std::vector<Node> nodes_;
  std::vector<std::string> identifiers_;
  int root_ = -1;
};

}  // namespace feedsim
