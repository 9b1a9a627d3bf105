#include "vigil/kvconfig.hpp"

#include "vigil/errors.hpp"
#include "vigil/textio.hpp"

namespace vigil {

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("config line " + std::to_string(line_no) +
                       ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("config line " + std::to_string(line_no) +
                       ": empty key");
    }
    cfg.kv_[std::string(key)] = std::string(value);
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

bool KeyValueConfig::contains(const std::string& key) const {
  return kv_.contains(key);
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  if (auto it = kv_.find(key); it != kv_.end()) return it->second;
  return std::nullopt;
}

double KeyValueConfig::get_double(const std::string& key,
                                  double fallback) const {
  auto v = get(key);
  return v ? parse_double(*v, "config key '" + key + "'") : fallback;
}

long long KeyValueConfig::get_int(const std::string& key,
                                  long long fallback) const {
  auto v = get(key);
  return v ? parse_int(*v, "config key '" + key + "'") : fallback;
}

}  // namespace vigil
