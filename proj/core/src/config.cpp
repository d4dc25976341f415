#include "tome/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tome {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& origin, const char* expected) {
  throw std::invalid_argument(origin + ": key '" + key + "': expected " + expected + ", got '" +
                              value + "'");
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  KeyValueConfig cfg;
  cfg.parse(in, path.string(), path.parent_path(), 0);
  return cfg;
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  KeyValueConfig cfg;
  cfg.parse(in, origin, std::filesystem::current_path(), 0);
  return cfg;
}

void KeyValueConfig::parse(std::istream& in, const std::string& origin,
                           const std::filesystem::path& base_dir, int depth) {
  if (depth > 16) throw std::invalid_argument(origin + ": include nesting too deep");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    std::string key, value;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      key = trim(line.substr(0, eq));
      value = trim(line.substr(eq + 1));
    } else if (line.rfind("include", 0) == 0) {
      key = "include";
      value = trim(line.substr(7));
    } else {
      throw std::invalid_argument(where + ": expected 'key = value'");
    }
    if (key.empty()) throw std::invalid_argument(where + ": empty key");

    if (key == "include") {
      std::filesystem::path inc = value;
      if (inc.is_relative()) inc = base_dir / inc;
      std::ifstream sub(inc);
      if (!sub) throw std::invalid_argument(where + ": cannot open include '" + value + "'");
      parse(sub, inc.string(), inc.parent_path(), depth + 1);
      continue;
    }
    if (key.size() > 5 && key.compare(key.size() - 5, 5, "_file") == 0) {
      std::filesystem::path p = value;
      if (p.is_relative() && !base_dir.empty()) value = (base_dir / p).string();
    }
    entries_[key] = Entry{value, where};
  }
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = Entry{value, "<set>"};
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::string KeyValueConfig::origin(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? std::string("<default>") : it->second.origin;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second.value;
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v, it->second.origin, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v, it->second.origin, "a number");
  }
}

double KeyValueConfig::require_double(const std::string& key) const {
  if (!has(key)) throw std::invalid_argument("missing required key '" + key + "'");
  return get_double(key, 0.0);
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second.value;
  // Accept integral values written in scientific notation, e.g. 1e6.
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || d != static_cast<double>(static_cast<long long>(d))) {
      bad_value(key, v, it->second.origin, "an integer");
    }
    return static_cast<long long>(d);
  } catch (const std::logic_error&) {
    bad_value(key, v, it->second.origin, "an integer");
  }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second.value;
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    bad_value(key, v, it->second.origin, "an unsigned 64-bit integer");
  }
  return out;
}

}  // namespace tome
