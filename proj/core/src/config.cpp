#include "savfi/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace savfi {
namespace {

std::string trim(const std::string& s) {
  const auto start = s.find_first_not_of(" \t\r");
  if (start == std::string::npos) {
    return "";
  }
  const auto stop = s.find_last_not_of(" \t\r");
  return s.substr(start, stop - start + 1);
}

}  // namespace

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw ConfigError("cannot read config file: " + path.string());
  }
  std::stringstream buffer;
  buffer << is.rdbuf();
  try {
    return from_string(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Config Config::from_string(const std::string& text) {
  Config config;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    config.values_[key] = value;
  }
  return config;
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  if (key.empty()) {
    throw ConfigError("empty config key");
  }
  values_[key] = value;
}

bool Config::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: '" +
                      it->second + "'");
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: '" +
                      it->second + "'");
  }
}

std::uint64_t Config::get_u64(const std::string& key,
                              std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an unsigned integer: '" +
                      it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") {
    return true;
  }
  if (v == "0" || v == "false" || v == "no" || v == "off") {
    return false;
  }
  throw ConfigError("config key '" + key + "' is not a boolean: '" +
                    it->second + "'");
}

}  // namespace savfi
