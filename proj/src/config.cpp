#include "dkg/config.hpp"

#include <charconv>
#include <fstream>

#include "dkg/error.hpp"

namespace dkg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_pair(const std::string& text,
                                               const std::string& at) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw usage_error(at + "expected key = value");
  std::string key = trim(text.substr(0, eq));
  std::string value = trim(text.substr(eq + 1));
  if (key.empty()) throw usage_error(at + "empty key");
  return {key, value};
}

}  // namespace

ConfigMap ConfigMap::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open config " + path);
  ConfigMap c;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const std::string at = path + ":" + std::to_string(n) + ": ";
    auto [k, v] = split_pair(line, at);
    if (c.values_.count(k)) throw usage_error(at + "duplicate key '" + k + "'");
    c.values_[k] = v;
  }
  return c;
}

ConfigMap ConfigMap::from_pairs(std::span<const std::string> pairs) {
  ConfigMap c;
  for (const auto& p : pairs) {
    auto [k, v] = split_pair(p, "--set " + p + ": ");
    c.values_[k] = v;
  }
  return c;
}

void ConfigMap::merge(const ConfigMap& overrides) {
  for (const auto& [k, v] : overrides.values_) values_[k] = v;
}

void ConfigMap::get(const std::string& key, double& out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    out = v;
  } catch (const std::exception&) {
    throw usage_error("config key '" + key + "': not a number: " + it->second);
  }
}

void ConfigMap::get(const std::string& key, std::uint64_t& out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  const std::string& s = it->second;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw usage_error("config key '" + key + "': not a non-negative integer: " + s);
  out = v;
}

void ConfigMap::get(const std::string& key, std::string& out) const {
  auto it = values_.find(key);
  if (it != values_.end()) out = it->second;
}

void ConfigMap::require_known(const std::set<std::string>& known) const {
  for (const auto& [k, v] : values_)
    if (!known.count(k)) throw usage_error("unknown config key '" + k + "'");
}

}  // namespace dkg
