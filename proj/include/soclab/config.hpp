#pragma once

// Flat key = value configuration files with [section] headers. Keys are
// addressed as "section.key"; unknown keys are rejected by the consumers.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "soclab/lattice.hpp"

namespace soclab {

class KeyValueConfig {
public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      if (body.front() == '[') {
        if (body.back() != ']' || body.size() < 3)
          throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
        section = trim(body.substr(1, body.size() - 2));
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(body.substr(0, eq));
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values_.count(full)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + full);
      cfg.values_[full] = trim(body.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const auto v = std::stoll(it->second, &used);
      if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("key " + key + ": expected integer, got '" + it->second + "'");
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const auto v = std::stod(it->second, &used);
      if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("key " + key + ": expected number, got '" + it->second + "'");
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("key " + key + ": expected true|false, got '" + it->second + "'");
  }

  /// Rejects keys outside `known`.
  void require_known(const std::vector<std::string>& known) const {
    for (const auto& [k, v] : values_) {
      bool ok = false;
      for (const auto& n : known) ok = ok || n == k;
      if (!ok) throw ConfigError("unknown config key '" + k + "'");
    }
  }

  /// Writes sections in key order so output is stable.
  void write(std::ostream& os) const {
    std::string current;
    bool first = true;
    for (const auto& [full, value] : values_) {
      const auto dot = full.find('.');
      const std::string section = dot == std::string::npos ? "" : full.substr(0, dot);
      const std::string key = dot == std::string::npos ? full : full.substr(dot + 1);
      if (first || section != current) {
        if (!first) os << '\n';
        if (!section.empty()) os << '[' << section << "]\n";
        current = section;
        first = false;
      }
      os << key << " = " << value << '\n';
    }
  }

private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
};

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  for (int p = 1; p < 17; ++p) {
    std::ostringstream shorter;
    shorter.precision(p);
    shorter << v;
    if (std::stod(shorter.str()) == v) return shorter.str();
  }
  return os.str();
}

}  // namespace soclab
