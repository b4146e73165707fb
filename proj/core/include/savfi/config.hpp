#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "savfi/common.hpp"

namespace savfi {

// Flat `key = value` configuration with section-prefixed keys
// (`probe.f0_hz = 8e6`). '#' starts a comment. Typed getters fall back to
// the given default when a key is absent and throw ConfigError on
// malformed values.
class Config {
public:
  Config() = default;

  static Config from_file(const std::filesystem::path& path);
  static Config from_string(const std::string& text);

  // `key=value` override (the CLI --set flag)
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key,
                        std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const {
    return values_;
  }

private:
  std::map<std::string, std::string> values_;
};

}  // namespace savfi
