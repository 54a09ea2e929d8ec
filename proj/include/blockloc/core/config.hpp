#pragma once

#include <map>
#include <string>

namespace blockloc {

// Flat `key = value` configuration. Every key has a registered default;
// unknown keys are rejected so typos fail loudly.
class Config {
 public:
  Config();  // defaults only

  static Config from_file(const std::string& path);

  // "key=value" as given on the command line.
  void set_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace blockloc
