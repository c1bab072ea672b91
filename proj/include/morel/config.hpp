#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace morel {

/// Run configuration: a flat map of dotted keys with a fixed schema.
///
/// File grammar, one entry per line:
///
///   # comment
///   key.path = value
///   [section]        (prefixes the following keys with "section.")
///
/// Values are everything after '=' with surrounding spaces removed. Lists
/// are comma separated.
struct ConfigIssue {
  std::string key;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

enum class KeyType { string, choice, integer, unsigned_integer, real, int_list, real_list, string_list };

struct KeySpec {
  std::string key;
  KeyType type;
  std::string default_value;  // ignored when required
  bool required = false;
  std::vector<std::string> choices;  // KeyType::choice and string_list
  std::string doc;
};

class RunConfig {
 public:
  static const std::vector<KeySpec>& schema();

  /// Validates everything and throws ConfigError listing every problem.
  static RunConfig parse(std::string_view text, const std::string& source = "config");
  static RunConfig load(const std::string& path);

  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<double> get_real_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  /// Replaces a value after validating it against the schema.
  void set(const std::string& key, const std::string& value);

  /// Every key in schema order as "key = value" lines.
  std::string resolved() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace morel
