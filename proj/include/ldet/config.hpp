#pragma once

// Flat key-value configuration with [section] grouping. Keys are
// addressed as "section.key"; values keep their raw text and are
// converted on access. Defaults pushed through set_default() are
// echoed into the experiment manifest.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ldet {

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_count(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<std::size_t> get_count_list(const std::string& key,
                                          const std::vector<std::size_t>& fallback) const;

  void set(const std::string& key, const std::string& value);
  // Records the value only when the key is absent, so configs win.
  void set_default(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return values_; }
  // FNV-1a over the sorted entries; stable across runs.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ldet
