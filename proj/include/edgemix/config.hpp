#pragma once

// `key = value` configuration files. Blank lines and lines starting with '#'
// are ignored; unknown and repeated keys are errors.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/io.hpp"

namespace edgemix {

namespace config {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

/// Ordered key/value pairs read from text.
inline std::map<std::string, std::string> parse_pairs(const std::string& text,
                                                      const std::string& source) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key = value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(number) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ConfigError(source + ":" + std::to_string(number) + ": repeated key " + key);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double to_double(const std::string& key, const std::string& v) {
  auto x = io::parse_number<double>(v);
  if (!x || !std::isfinite(*x)) throw ConfigError(key + ": invalid real '" + v + "'");
  return *x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  auto x = io::parse_number<std::uint64_t>(v);
  if (!x) throw ConfigError(key + ": invalid non-negative integer '" + v + "'");
  return *x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (auto part : io::split(v, ',')) out.push_back(to_double(key, trim(part)));
  return out;
}

inline std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (auto part : io::split(v, ','))
    out.push_back(static_cast<std::size_t>(to_uint(key, trim(part))));
  return out;
}

template <typename Range>
std::string join_list(const Range& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>)
      out += io::format_double(v);
    else
      out += std::to_string(v);
  }
  return out;
}

/// Dispatch table from key to setter; rejects keys without a setter.
class Binder {
 public:
  using Setter = std::function<void(const std::string& key, const std::string& value)>;

  Binder& bind(std::string key, Setter s) {
    setters_.emplace(std::move(key), std::move(s));
    return *this;
  }

  void apply(const std::map<std::string, std::string>& pairs, const std::string& source) const {
    for (const auto& [k, v] : pairs) {
      auto it = setters_.find(k);
      if (it == setters_.end()) throw ConfigError(source + ": unknown key '" + k + "'");
      it->second(k, v);
    }
  }

 private:
  std::map<std::string, Setter> setters_;
};

}  // namespace config

}  // namespace edgemix
