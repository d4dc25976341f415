#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace tome {

/// Flat `key = value` configuration. Lines starting with '#' are comments;
/// `include = other.cfg` (or `include other.cfg`) splices another file,
/// resolved relative to the including file. Later assignments win.
class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    std::string origin;  // "file:line" or "<set>"
  };

  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_string(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  /// Origin of a key ("file:line"), for diagnostics.
  std::string origin(const std::string& key) const;

  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

 private:
  void parse(std::istream& in, const std::string& origin, const std::filesystem::path& base_dir,
             int depth);

  std::map<std::string, Entry> entries_;
};

}  // namespace tome
