#pragma once

// Line/token reader shared by the model file formats.

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/textio.hpp"

namespace vigil::detail {

class TokenLines {
 public:
  explicit TokenLines(std::istream& is) : is_(is) {}

  /// Next non-empty line split on whitespace; throws ParseError at EOF with
  /// `what` describing the expected content.
  std::vector<std::string> next(const std::string& what) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(t);
      if (!tokens.empty()) return tokens;
    }
    throw ParseError("unexpected end of model file while reading " + what);
  }

  std::vector<std::string> expect(const std::string& keyword, const std::string& what) {
    auto t = next(what);
    if (t.front() != keyword) {
      throw ParseError(where() + "expected '" + keyword + "' (" + what + "), found '" +
                       t.front() + "'");
    }
    return t;
  }

  std::string where() const { return "line " + std::to_string(line_no_) + ": "; }

  double number(const std::string& s, const std::string& what) const {
    return parse_double(s, where() + what);
  }
  long long integer(const std::string& s, const std::string& what) const {
    return parse_int(s, where() + what);
  }

 private:
  std::istream& is_;
  std::size_t line_no_ = 0;
};

/// Checks the `vigil-model <kind> v<N>` header line.
inline void check_header(const std::vector<std::string>& t, const std::string& kind,
                         int supported_version) {
  if (t.size() != 3 || t[0] != "vigil-model") throw ParseError("not a vigil model file");
  if (t[1] != kind) {
    throw ParseError("model file holds a '" + t[1] + "' model, expected '" + kind + "'");
  }
  const std::string want = "v" + std::to_string(supported_version);
  if (t[2] != want) {
    throw VersionError("unsupported " + kind + " model version '" + t[2] +
                       "' (supported: " + want + ")");
  }
}

/// Parses `key=value` tokens starting at index `from`.
inline std::vector<std::pair<std::string, std::string>> key_values(
    const std::vector<std::string>& t, std::size_t from) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = from; i < t.size(); ++i) {
    const auto eq = t[i].find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value, found '" + t[i] + "'");
    out.emplace_back(t[i].substr(0, eq), t[i].substr(eq + 1));
  }
  return out;
}

}  // namespace vigil::detail
