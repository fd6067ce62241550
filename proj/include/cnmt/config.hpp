#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnmt {

/// Bad configuration value, unknown key, or malformed config file.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ModelGate is a gate setting or "model" (whatever the checkpoint was trained with).
enum class KeyType { Int, Real, String, Gate, ModelGate, Bool };

struct ConfigKey {
  std::string name;  // "section.key"
  KeyType type;
  std::string fallback;
  std::string help;
  double min = 0.0;  // inclusive bounds for numbers
  double max = 0.0;  // ignored when min == max
};

/// Every recognized key with its default.
const std::vector<ConfigKey>& config_keys();

/// Flat key-value configuration grouped in sections:
///
///   [train]
///   cache_epochs = 4
///
/// Values are validated on set; unknown keys are rejected.
class Config {
 public:
  Config();  // all defaults

  static Config load(const std::string& path);
  static Config parse(const std::string& text, const std::string& origin = "<config>");

  void set(const std::string& key, const std::string& value);
  const std::string& raw(const std::string& key) const;

  std::int64_t integer(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  double real(const std::string& key) const;
  const std::string& text(const std::string& key) const { return raw(key); }
  bool flag(const std::string& key) const;

  /// Resolved configuration in the same file format, sections sorted.
  std::string render() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace cnmt
