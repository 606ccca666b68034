#pragma once

// Flat configuration files:
//
//   # comment
//   [section]
//   key = value
//
// Keys before the first header belong to section "". Lists are comma-separated.
// Every command declares the sections and keys it accepts; anything else is rejected.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pacmeta/error.hpp"
#include "pacmeta/rng.hpp"

namespace pacmeta {

using ConfigSchema = std::map<std::string, std::set<std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

class Config {
 public:
  static Config parse(std::string_view text, const std::string& source = "<config>") {
    Config c;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto hash = raw.find('#');
      const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      const std::string where = source + ":" + std::to_string(line_no);
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
        section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
        if (section.empty()) throw ConfigError(where + ": empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
      const std::string key = detail::trim(std::string_view(line).substr(0, eq));
      if (key.empty()) throw ConfigError(where + ": missing key");
      if (c.values_[section].count(key)) throw ConfigError(where + ": duplicate key '" + qualified(section, key) + "'");
      c.values_[section][key] = detail::trim(std::string_view(line).substr(eq + 1));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  /// Applies an override of the form "section.key=value" (or "key=value" for section "").
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
    const std::string lhs = detail::trim(std::string_view(assignment).substr(0, eq));
    const auto dot = lhs.rfind('.');
    const std::string section = dot == std::string::npos ? "" : lhs.substr(0, dot);
    const std::string key = dot == std::string::npos ? lhs : lhs.substr(dot + 1);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    values_[section][key] = detail::trim(std::string_view(assignment).substr(eq + 1));
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    values_[section][key] = value;
  }

  void validate(const ConfigSchema& schema) const {
    for (const auto& [section, kv] : values_) {
      const auto it = schema.find(section);
      if (it == schema.end()) throw ConfigError("unknown section [" + section + "]");
      for (const auto& [key, value] : kv) {
        if (!it->second.count(key)) throw ConfigError("unknown key '" + qualified(section, key) + "'");
      }
    }
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto it = values_.find(section);
    return it != values_.end() && it->second.count(key);
  }

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
    return has(section, key) ? values_.at(section).at(key) : fallback;
  }

  std::string require_string(const std::string& section, const std::string& key) const {
    if (!has(section, key)) throw ConfigError("missing required key '" + qualified(section, key) + "'");
    return values_.at(section).at(key);
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? parse_double(section, key, values_.at(section).at(key)) : fallback;
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const {
    return has(section, key) ? parse_u64(section, key, values_.at(section).at(key)) : fallback;
  }

  std::size_t get_size(const std::string& section, const std::string& key, std::size_t fallback) const {
    return std::size_t(get_u64(section, key, fallback));
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = values_.at(section).at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + qualified(section, key) + "' expects a boolean, got '" + v + "'");
  }

  std::vector<std::size_t> get_size_list(const std::string& section, const std::string& key,
                                         std::vector<std::size_t> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::size_t> out;
    for (const auto& item : detail::split_list(values_.at(section).at(key))) {
      out.push_back(std::size_t(parse_u64(section, key, item)));
    }
    if (out.empty()) throw ConfigError("'" + qualified(section, key) + "' must not be an empty list");
    return out;
  }

  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      std::vector<double> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    for (const auto& item : detail::split_list(values_.at(section).at(key))) out.push_back(parse_double(section, key, item));
    if (out.empty()) throw ConfigError("'" + qualified(section, key) + "' must not be an empty list");
    return out;
  }

  /// Canonical text (sorted sections and keys); stable across formatting changes.
  std::string canonical() const {
    std::string out;
    for (const auto& [section, kv] : values_) {
      for (const auto& [key, value] : kv) out += qualified(section, key) + "=" + value + "\n";
    }
    return out;
  }

  std::uint64_t hash() const { return fnv1a(canonical()); }

 private:
  static std::string qualified(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  static double parse_double(const std::string& section, const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("'" + qualified(section, key) + "' expects a number, got '" + v + "'");
    }
    return out;
  }

  static std::uint64_t parse_u64(const std::string& section, const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("'" + qualified(section, key) + "' expects a non-negative integer, got '" + v + "'");
    }
    return out;
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace pacmeta
