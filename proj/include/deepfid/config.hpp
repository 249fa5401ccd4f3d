/*
 * Copyright 2026 DeepFid Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// INI-style run configuration. Unknown sections and keys are rejected with
// the offending line, so a typo fails loudly instead of silently using a
// default. The canonical dump (sorted sections and keys) is hashed into the
// config fingerprint stamped on every artifact.

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepfid/checkpoint.hpp"
#include "deepfid/textio.hpp"

namespace deepfid {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline const std::map<std::string, std::set<std::string>>& known_config_keys() {
  static const std::map<std::string, std::set<std::string>> known = {
      {"data",
       {"images", "labels", "val_fraction", "synthetic", "count", "seed"}},
      {"model",
       {"backbone", "classes", "epochs", "lr", "batch_size", "input"}},
      {"embed",
       {"scheme", "alpha", "beta", "gamma", "m", "max_epochs", "min_epochs",
        "epsilon", "lr", "batch_size", "eval_batch"}},
      {"key", {"kind", "count", "text", "text_row", "text_col"}},
      {"attack", {"kind", "epochs", "lr", "fraction", "bits", "batch_size"}},
      {"sweep", {"schemes", "seeds"}},
  };
  return known;
}

}  // namespace detail

struct Config {
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) > 0;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    auto s = sections.find(section);
    if (s == sections.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  std::string require(const std::string& section, const std::string& key) const {
    if (!has(section, key))
      throw ConfigError("missing required config value [" + section + "] " + key);
    return sections.at(section).at(key);
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = sections.at(section).at(key);
    std::size_t pos = 0;
    double out;
    try {
      out = std::stod(v, &pos);
    } catch (const std::exception&) {
      throw ConfigError("[" + section + "] " + key + ": not a number: '" + v + "'");
    }
    if (pos != v.size())
      throw ConfigError("[" + section + "] " + key + ": not a number: '" + v + "'");
    return out;
  }

  std::size_t get_size(const std::string& section, const std::string& key,
                       std::size_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = sections.at(section).at(key);
    try {
      return detail::parse_size(v, "[" + section + "] " + key);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const {
    return static_cast<std::uint64_t>(
        get_size(section, key, static_cast<std::size_t>(fallback)));
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = sections.at(section).at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("[" + section + "] " + key + ": not a boolean: '" + v + "'");
  }

  void set(const std::string& section, const std::string& key,
           const std::string& value) {
    sections[section][key] = value;
  }

  // Sorted canonical text; two configs with the same effective content hash
  // identically regardless of file formatting.
  std::string canonical() const {
    std::string out;
    for (const auto& [section, kv] : sections) {
      out += "[" + section + "]\n";
      for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    }
    return out;
  }

  std::string hash() const { return hex64(fnv1a64(canonical())); }
};

inline Config parse_config(const std::string& text) {
  Config cfg;
  const auto& known = detail::known_config_keys();
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#' || line[0] == ';') {
      if (pos > text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) +
                          ": unterminated section header: " + line);
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!known.count(section))
        throw ConfigError("line " + std::to_string(line_no) +
                          ": unknown section [" + section + "]");
      cfg.sections[section];  // empty sections still participate in the hash
    } else {
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(line_no) +
                          ": expected key = value, got: " + line);
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) +
                          ": key outside any [section]");
      std::string key = detail::trim(line.substr(0, eq));
      std::string value = detail::trim(line.substr(eq + 1));
      if (!known.at(section).count(key))
        throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" +
                          key + "' in [" + section + "]");
      cfg.sections[section][key] = value;
    }
    if (pos > text.size()) break;
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_config(std::string(bytes.begin(), bytes.end()));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace deepfid
