#include "datalqg/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace datalqg {

double ConfigValue::as_number() const {
  if (!is_number()) throw std::runtime_error("config value is not a number");
  return std::get<double>(v_);
}

long long ConfigValue::as_integer() const {
  const double d = as_number();
  const double r = std::llround(d);
  if (std::abs(d - r) > 1e-9) throw std::runtime_error("config value is not an integer");
  return static_cast<long long>(r);
}

bool ConfigValue::as_bool() const {
  if (!is_bool()) throw std::runtime_error("config value is not a boolean");
  return std::get<bool>(v_);
}

const std::string& ConfigValue::as_string() const {
  if (!is_string()) throw std::runtime_error("config value is not a string");
  return std::get<std::string>(v_);
}

const ConfigValue::Array& ConfigValue::as_array() const {
  if (!is_array()) throw std::runtime_error("config value is not an array");
  return std::get<Array>(v_);
}

std::vector<double> ConfigValue::as_vector() const {
  std::vector<double> out;
  for (const auto& e : as_array()) out.push_back(e.as_number());
  return out;
}

std::vector<std::vector<double>> ConfigValue::as_matrix() const {
  std::vector<std::vector<double>> out;
  for (const auto& row : as_array()) out.push_back(row.as_vector());
  if (!out.empty())
    for (const auto& r : out)
      if (r.size() != out.front().size())
        throw std::runtime_error("config matrix has ragged rows");
  return out;
}

namespace {

struct Cursor {
  const std::string& s;
  size_t i = 0;
  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool done() const { return i >= s.size(); }
  char peek() const { return s[i]; }
};

ConfigValue parse_value(Cursor& c);

ConfigValue parse_array(Cursor& c) {
  ConfigValue::Array arr;
  ++c.i;  // consume '['
  c.skip_ws();
  if (!c.done() && c.peek() == ']') {
    ++c.i;
    return ConfigValue(ConfigValue::Storage(arr));
  }
  while (true) {
    arr.push_back(parse_value(c));
    c.skip_ws();
    if (c.done()) throw std::runtime_error("config: unterminated array");
    if (c.peek() == ',') {
      ++c.i;
      c.skip_ws();
      continue;
    }
    if (c.peek() == ']') {
      ++c.i;
      return ConfigValue(ConfigValue::Storage(arr));
    }
    throw std::runtime_error("config: expected ',' or ']' in array");
  }
}

ConfigValue parse_value(Cursor& c) {
  c.skip_ws();
  if (c.done()) throw std::runtime_error("config: missing value");
  const char ch = c.peek();
  if (ch == '[') return parse_array(c);
  if (ch == '"') {
    const size_t end = c.s.find('"', c.i + 1);
    if (end == std::string::npos) throw std::runtime_error("config: unterminated string");
    std::string str = c.s.substr(c.i + 1, end - c.i - 1);
    c.i = end + 1;
    return ConfigValue(ConfigValue::Storage(std::move(str)));
  }
  // bare token: bool or number
  size_t start = c.i;
  while (c.i < c.s.size() && c.s[c.i] != ',' && c.s[c.i] != ']' && c.s[c.i] != ' ' &&
         c.s[c.i] != '\t')
    ++c.i;
  const std::string tok = c.s.substr(start, c.i - start);
  if (tok == "true") return ConfigValue(ConfigValue::Storage(true));
  if (tok == "false") return ConfigValue(ConfigValue::Storage(false));
  try {
    size_t used = 0;
    const double d = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return ConfigValue(ConfigValue::Storage(d));
  } catch (const std::exception&) {
    throw std::runtime_error("config: cannot parse value '" + tok + "'");
  }
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
    for (char ch : key)
      if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '.')
        throw std::runtime_error("config: invalid key '" + key + "'");
    const std::string rhs = trim(line.substr(eq + 1));
    Cursor c{rhs, 0};
    ConfigValue v = parse_value(c);
    c.skip_ws();
    if (!c.done())
      throw std::runtime_error("config: trailing characters after value for key '" + key + "'");
    cfg.values_[key] = std::move(v);
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

const ConfigValue& ConfigFile::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("config: missing key '" + key + "'");
  return it->second;
}

double ConfigFile::number_or(const std::string& key, double fallback) const {
  return contains(key) ? at(key).as_number() : fallback;
}

long long ConfigFile::integer_or(const std::string& key, long long fallback) const {
  return contains(key) ? at(key).as_integer() : fallback;
}

bool ConfigFile::bool_or(const std::string& key, bool fallback) const {
  return contains(key) ? at(key).as_bool() : fallback;
}

std::string ConfigFile::string_or(const std::string& key, const std::string& fallback) const {
  return contains(key) ? at(key).as_string() : fallback;
}

void ConfigFile::apply_override(const std::string& assignment) {
  const ConfigFile parsed = parse_string(assignment);
  for (const auto& [k, v] : parsed.values()) values_[k] = v;
}

}  // namespace datalqg
