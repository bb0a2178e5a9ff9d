#include "vocabforge/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "vocabforge/error.hpp"

namespace vocabforge {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw parse_error("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw parse_error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw parse_error("config line " + std::to_string(line_no) + ": empty key");
    }
    cfg.entries_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

void Config::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw config_error("missing required config key: " + key);
  }
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

int64_t Config::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    return std::stoll(v);
  } catch (const std::exception&) {
    throw config_error("config key " + key + " is not an integer: " + v);
  }
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

uint64_t Config::get_seed(const std::string& key) const {
  // all randomness must flow from named seeds; no fallback on purpose
  int64_t v = get_int(key);
  if (v < 0) throw config_error("config key " + key + " must be a non-negative seed");
  return static_cast<uint64_t>(v);
}

double Config::get_real(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw config_error("config key " + key + " is not a number: " + v);
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string v = get_string(key);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw config_error("config key " + key + " is not a boolean: " + v);
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get_string(key, ""));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace vocabforge
