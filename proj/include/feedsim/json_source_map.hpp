#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

namespace feedsim {

struct SourcePosition {
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based, in bytes
};

inline SourcePosition position_of(std::string_view text, std::size_t offset) {
  SourcePosition pos;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++pos.line;
      pos.column = 1;
    } else {
      ++pos.column;
    }
  }
  return pos;
}

/// Byte offsets of every value in an already well-formed JSON document,
/// keyed by RFC 6901 pointer. nlohmann::json drops positions after parsing,
/// so diagnostics re-scan the text to locate the node they refer to.
class JsonSourceMap {
 public:
  static JsonSourceMap build(std::string_view text) {
    JsonSourceMap map;
    Scanner s{text, 0, map};
    s.skip_ws();
    if (s.i < text.size()) s.value("");
    return map;
  }

  /// Offset of the value at `pointer`, or of its nearest recorded ancestor.
  std::size_t offset_of(std::string pointer) const {
    while (true) {
      if (auto it = offsets_.find(pointer); it != offsets_.end()) return it->second;
      if (pointer.empty()) return 0;
      pointer.erase(pointer.rfind('/'));
    }
  }

  SourcePosition locate(std::string_view text, const std::string& pointer) const {
    return position_of(text, offset_of(pointer));
  }

 private:
  struct Scanner {
    std::string_view t;
    std::size_t i;
    JsonSourceMap& map;

    void skip_ws() {
      while (i < t.size() && (t[i] == ' ' || t[i] == '\n' || t[i] == '\r' || t[i] == '\t')) ++i;
    }

    std::string string_literal() {
      std::string out;
      ++i;  // opening quote
      while (i < t.size() && t[i] != '"') {
        if (t[i] == '\\' && i + 1 < t.size()) {
          out.push_back(t[i]);
          ++i;
        }
        out.push_back(t[i]);
        ++i;
      }
      ++i;  // closing quote
      return out;
    }

    static std::string escape_pointer_token(const std::string& raw) {
      std::string out;
      for (char c : raw) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out.push_back(c);
      }
      return out;
    }

    void value(const std::string& pointer) {
      skip_ws();
      map.offsets_[pointer] = i;
      if (i >= t.size()) return;
      char c = t[i];
      if (c == '{') {
        ++i;
        skip_ws();
        if (i < t.size() && t[i] == '}') {
          ++i;
          return;
        }
        while (i < t.size()) {
          skip_ws();
          std::string key = string_literal();
          skip_ws();
          ++i;  // ':'
          value(pointer + "/" + escape_pointer_token(key));
          skip_ws();
          if (i < t.size() && t[i] == ',') {
            ++i;
            continue;
          }
          ++i;  // '}'
          return;
        }
      } else if (c == '[') {
        ++i;
        skip_ws();
        if (i < t.size() && t[i] == ']') {
          ++i;
          return;
        }
        std::size_t index = 0;
        while (i < t.size()) {
          value(pointer + "/" + std::to_string(index++));
          skip_ws();
          if (i < t.size() && t[i] == ',') {
            ++i;
            continue;
          }
          ++i;  // ']'
          return;
        }
      } else if (c == '"') {
        string_literal();
      } else {
        while (i < t.size() && t[i] != ',' && t[i] != '}' && t[i] != ']' && t[i] != ' ' && t[i] != '\n' &&
               t[i] != '\r' && t[i] != '\t')
          ++i;
      }
    }
  };

  std::map<std::string, std::size_t> offsets_;
};

}  // namespace feedsim
