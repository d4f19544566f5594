#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace uwstack {

// Minimal TOML-like document:
//   [section]        single table (last one wins)
//   [[section]]      appends an array-of-tables entry
//   key = value      strings (optionally "quoted"), numbers, true/false
//   # comment
class ConfigDoc {
 public:
  using Table = std::map<std::string, std::string>;

  static ConfigDoc parse(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string line;
    Table* current = nullptr;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.size() >= 4 && s.rfind("[[", 0) == 0 && s.substr(s.size() - 2) == "]]") {
        std::string name = strip(s.substr(2, s.size() - 4));
        doc.tables_[name].emplace_back();
        current = &doc.tables_[name].back();
        continue;
      }
      if (s.front() == '[' && s.back() == ']') {
        std::string name = strip(s.substr(1, s.size() - 2));
        doc.tables_[name] = {Table{}};
        current = &doc.tables_[name].back();
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos || !current)
        throw std::invalid_argument("config parse error at line " +
                                    std::to_string(lineno) + ": " + s);
      std::string key = strip(s.substr(0, eq));
      std::string value = strip(s.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      (*current)[key] = value;
    }
    return doc;
  }

  static ConfigDoc parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  const std::vector<Table>& tables(const std::string& name) const {
    static const std::vector<Table> empty;
    auto it = tables_.find(name);
    return it == tables_.end() ? empty : it->second;
  }

  const Table* table(const std::string& name) const {
    auto it = tables_.find(name);
    if (it == tables_.end() || it->second.empty()) return nullptr;
    return &it->second.front();
  }

  static std::string get_str(const Table& t, const std::string& key,
                             const std::string& def = "") {
    auto it = t.find(key);
    return it == t.end() ? def : it->second;
  }

  static long get_int(const Table& t, const std::string& key, long def = 0) {
    auto it = t.find(key);
    return it == t.end() ? def : std::stol(it->second);
  }

  static double get_double(const Table& t, const std::string& key,
                           double def = 0.0) {
    auto it = t.find(key);
    return it == t.end() ? def : std::stod(it->second);
  }

  static bool get_bool(const Table& t, const std::string& key, bool def = false) {
    auto it = t.find(key);
    if (it == t.end()) return def;
    return it->second == "true" || it->second == "1";
  }

 private:
  static std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::vector<Table>> tables_;
};

}  // namespace uwstack
