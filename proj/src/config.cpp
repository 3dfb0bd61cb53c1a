#include "ldet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ldet {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' has non-numeric value '" + text + "'");
  }
  if (pos != text.size()) {
    throw std::runtime_error("config: key '" + key + "' has trailing text in '" + text + "'");
  }
  return v;
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("config: unterminated section at line " + std::to_string(lineno));
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw std::runtime_error("config: empty section name at line " + std::to_string(lineno));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: expected key = value at line " + std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
    }
    cfg.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("config: missing key '" + key + "'");
  return it->second;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

std::size_t Config::get_count(const std::string& key, std::size_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const double v = parse_double(key, it->second);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw std::runtime_error("config: key '" + key + "' must be a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' must be an unsigned integer");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: key '" + key + "' has non-boolean value '" + v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const std::string& part : split_list(it->second)) out.push_back(parse_double(key, part));
  if (out.empty()) throw std::runtime_error("config: key '" + key + "' has an empty list");
  return out;
}

std::vector<std::size_t> Config::get_count_list(
    const std::string& key, const std::vector<std::size_t>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::size_t> out;
  for (const std::string& part : split_list(it->second)) {
    const double v = parse_double(key, part);
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw std::runtime_error("config: key '" + key + "' must list nonnegative integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw std::runtime_error("config: key '" + key + "' has an empty list");
  return out;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

void Config::set_default(const std::string& key, const std::string& value) {
  values_.emplace(key, value);
}

std::string Config::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0x1f;
    h *= 1099511628211ULL;
  };
  for (const auto& [k, v] : values_) {
    mix(k);
    mix(v);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ldet
