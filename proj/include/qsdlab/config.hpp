#pragma once

// Flat INI-style configuration: [section] headers, key = value lines,
// '#' comments. Unknown sections or keys are hard errors; the canonical
// form (sorted section.key=value lines) feeds the run-manifest hash,
// which is therefore stable under reordering.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsdlab {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using ConfigSchema = std::map<std::string, std::set<std::string>>;

class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in) {
    ConfigFile cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw config_error(err(lineno, "unterminated section header"));
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty()) throw config_error(err(lineno, "empty section name"));
        cfg.values_.try_emplace(section);
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) throw config_error(err(lineno, "expected key = value"));
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw config_error(err(lineno, "empty key"));
      if (section.empty()) throw config_error(err(lineno, "key outside any [section]"));
      if (!cfg.values_[section].emplace(key, value).second)
        throw config_error(err(lineno, "duplicate key '" + section + "." + key + "'"));
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    return parse(in);
  }

  void validate_schema(const ConfigSchema& schema) const {
    for (const auto& [section, kv] : values_) {
      const auto it = schema.find(section);
      if (it == schema.end()) throw config_error("unknown config section [" + section + "]");
      for (const auto& [key, value] : kv)
        if (!it->second.count(key))
          throw config_error("unknown config key '" + section + "." + key + "'");
    }
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    return s != values_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const auto s = values_.find(section);
    if (s == values_.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    return parse_double(section, key, get_string(section, key, ""));
  }

  std::uint64_t get_uint(const std::string& section, const std::string& key,
                         std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get_string(section, key, "");
    try {
      std::size_t used = 0;
      const std::uint64_t r = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw config_error("config value '" + section + "." + key + "' is not an integer: " + v);
    }
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get_string(section, key, "");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("config value '" + section + "." + key + "' is not a boolean: " + v);
  }

  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(get_string(section, key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(section, key, trim(item)));
    if (out.empty())
      throw config_error("config value '" + section + "." + key + "' is an empty list");
    return out;
  }

  std::vector<std::string> get_string_list(const std::string& section, const std::string& key,
                                           const std::vector<std::string>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::string> out;
    std::stringstream ss(get_string(section, key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
  }

  // Sorted "section.key=value" lines; hashing this makes the manifest hash
  // independent of key order in the file.
  std::string canonical() const {
    std::string out;
    for (const auto& [section, kv] : values_)
      for (const auto& [key, value] : kv) out += section + "." + key + "=" + value + "\n";
    return out;
  }

  std::uint64_t hash() const {  // FNV-1a 64
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : canonical()) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static std::string err(std::size_t lineno, const std::string& msg) {
    return "config line " + std::to_string(lineno) + ": " + msg;
  }
  double parse_double(const std::string& section, const std::string& key,
                      const std::string& v) const {
    try {
      std::size_t used = 0;
      const double r = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw config_error("config value '" + section + "." + key + "' is not a number: " + v);
    }
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace qsdlab
