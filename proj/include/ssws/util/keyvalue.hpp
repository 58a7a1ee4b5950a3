#pragma once

#include <map>
#include <string>

namespace ssws::util {

// Plain-text `key = value` files. `#` starts a comment; blank lines ignored.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ssws::util
