#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace dkg {

/// Flat key=value settings. '#' starts a comment; blank lines are ignored.
class ConfigMap {
 public:
  static ConfigMap from_file(const std::string& path);
  /// "key=value" strings, e.g. from repeated command-line flags.
  static ConfigMap from_pairs(std::span<const std::string> pairs);

  /// Later values win.
  void merge(const ConfigMap& overrides);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool empty() const { return values_.empty(); }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Typed lookups; absent keys leave `out` untouched. Malformed values
  /// throw a usage error naming the key.
  void get(const std::string& key, double& out) const;
  void get(const std::string& key, std::uint64_t& out) const;
  void get(const std::string& key, std::string& out) const;

  /// Throws for any key not in `known`.
  void require_known(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dkg
