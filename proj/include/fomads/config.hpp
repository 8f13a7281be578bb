#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace fomads {

/// Flat `key = value` configuration text. One key per line, `#` starts a
/// comment, blank lines are ignored. Every lookup marks the key as used so
/// callers can reject unknown keys after all modules have read their part.
class KeyValues {
 public:
  KeyValues() = default;

  /// Throws ConfigError on malformed lines or duplicate keys.
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return entries_.contains(key); }
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  /// Throw ConfigError when the value does not parse as the requested type.
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  /// Throws ConfigError naming the first key that was never looked up.
  void reject_unused() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> used_;
};

}  // namespace fomads
