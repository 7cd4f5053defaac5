#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace datalqg {

/// Value of one key in the flat key-value experiment config: a scalar, a
/// string, a boolean, or a (possibly nested) array.
class ConfigValue {
 public:
  using Array = std::vector<ConfigValue>;
  using Storage = std::variant<double, bool, std::string, Array>;

  ConfigValue() : v_(0.0) {}
  explicit ConfigValue(Storage v) : v_(std::move(v)) {}

  bool is_number() const { return std::holds_alternative<double>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  bool is_array() const { return std::holds_alternative<Array>(v_); }

  double as_number() const;
  long long as_integer() const;
  bool as_bool() const;
  const std::string& as_string() const;
  const Array& as_array() const;

  std::vector<double> as_vector() const;
  std::vector<std::vector<double>> as_matrix() const;

 private:
  Storage v_;
};

/// Flat `key = value` config file. Lines starting with '#' (or trailing
/// '#' comments outside strings) are ignored; arrays use bracket syntax and
/// may nest one level for matrix literals, e.g. B = [[1, 0.2], [2, 0.3]].
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text);

  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  const ConfigValue& at(const std::string& key) const;

  double number_or(const std::string& key, double fallback) const;
  long long integer_or(const std::string& key, long long fallback) const;
  bool bool_or(const std::string& key, bool fallback) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;

  /// Apply `key=value` override strings (CLI flags win over file keys).
  void apply_override(const std::string& assignment);

  const std::map<std::string, ConfigValue>& values() const { return values_; }

 private:
  std::map<std::string, ConfigValue> values_;
};

}  // namespace datalqg
