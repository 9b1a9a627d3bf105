#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace vigil {

/// Flat `key = value` text format. `#` starts a comment (to end of line);
/// blank lines are ignored; later duplicates overwrite earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }
  void set(std::string key, std::string value) {
    kv_[std::move(key)] = std::move(value);
  }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace vigil
