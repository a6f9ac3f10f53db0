#pragma once

// Flat, typed key-value experiment configuration.
//
//   schema_version = 1
//   kind = gs-scaling
//   master_seed = 1
//   dim: int = 2
//   sizes: ints = 16, 32, 64
//
// Lines are `name: type = value` with type one of int, float, bool, string,
// ints, floats; `#` starts a comment. schema_version, kind and master_seed
// are untyped header keys. Worker count and output location are run options,
// not configuration, so they never reach the digest.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rbc/rng.hpp"

namespace rbc {

inline constexpr int config_schema_version = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueType { integer, real, boolean, string, integers, reals };

inline std::string_view to_string(ValueType t) {
  switch (t) {
    case ValueType::integer: return "int";
    case ValueType::real: return "float";
    case ValueType::boolean: return "bool";
    case ValueType::string: return "string";
    case ValueType::integers: return "ints";
    case ValueType::reals: return "floats";
  }
  return "?";
}

inline ValueType parse_value_type(std::string_view s) {
  for (auto t : {ValueType::integer, ValueType::real, ValueType::boolean, ValueType::string, ValueType::integers, ValueType::reals})
    if (to_string(t) == s) return t;
  throw ConfigError("unknown value type '" + std::string(s) + "'");
}

using Value = std::variant<std::int64_t, double, bool, std::string, std::vector<std::int64_t>, std::vector<double>>;

inline ValueType type_of(const Value& v) { return static_cast<ValueType>(v.index()); }

namespace detail {

inline std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

inline std::int64_t parse_int(std::string_view s) {
  const auto t = trim(s);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw ConfigError("bad integer '" + t + "'");
  return v;
}

inline double parse_real(std::string_view s) {
  const auto t = trim(s);
  double v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw ConfigError("bad number '" + t + "'");
  return v;
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t a = 0;
  while (true) {
    const auto b = s.find(',', a);
    out.push_back(trim(s.substr(a, b == std::string_view::npos ? std::string_view::npos : b - a)));
    if (b == std::string_view::npos) break;
    a = b + 1;
  }
  return out;
}

/// Shortest text that parses back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

inline Value parse_value(ValueType t, std::string_view text) {
  switch (t) {
    case ValueType::integer: return detail::parse_int(text);
    case ValueType::real: return detail::parse_real(text);
    case ValueType::boolean: {
      const auto s = detail::trim(text);
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
      throw ConfigError("bad boolean '" + s + "'");
    }
    case ValueType::string: return detail::trim(text);
    case ValueType::integers: {
      std::vector<std::int64_t> v;
      for (const auto& x : detail::split_list(text)) v.push_back(detail::parse_int(x));
      return v;
    }
    case ValueType::reals: {
      std::vector<double> v;
      for (const auto& x : detail::split_list(text)) v.push_back(detail::parse_real(x));
      return v;
    }
  }
  throw ConfigError("unknown value type");
}

inline std::string format_value(const Value& v) {
  struct {
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(double x) const { return detail::format_real(x); }
    std::string operator()(bool x) const { return x ? "true" : "false"; }
    std::string operator()(const std::string& x) const { return x; }
    std::string operator()(const std::vector<std::int64_t>& xs) const {
      std::string s;
      for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? ", " : "") + std::to_string(xs[k]);
      return s;
    }
    std::string operator()(const std::vector<double>& xs) const {
      std::string s;
      for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? ", " : "") + detail::format_real(xs[k]);
      return s;
    }
  } f;
  return std::visit(f, v);
}

struct ExperimentConfig {
  int schema_version = config_schema_version;
  std::string kind;
  std::uint64_t master_seed = 1;
  std::map<std::string, Value> params;

  template <class T>
  const T& get(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("missing parameter '" + name + "'");
    if (auto p = std::get_if<T>(&it->second)) return *p;
    throw ConfigError("parameter '" + name + "' has type " + std::string(to_string(type_of(it->second))));
  }
  bool has(const std::string& name) const { return params.count(name) > 0; }

  /// Canonical text: header, then parameters sorted by name.
  std::string canonical() const {
    std::ostringstream o;
    o << "schema_version = " << schema_version << "\n";
    o << "kind = " << kind << "\n";
    o << "master_seed = " << master_seed << "\n";
    for (const auto& [k, v] : params) o << k << ": " << to_string(type_of(v)) << " = " << format_value(v) << "\n";
    return o.str();
  }

  std::string digest() const {
    static const char* hex = "0123456789abcdef";
    std::uint64_t h = hash_string(canonical());
    std::string s(16, '0');
    for (int k = 15; k >= 0; --k, h >>= 4) s[static_cast<std::size_t>(k)] = hex[h & 15];
    return s;
  }
};

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  bool have_version = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected '='");
    const std::string lhs = detail::trim(std::string_view(line).substr(0, eq));
    const std::string rhs = std::string(std::string_view(line).substr(eq + 1));
    try {
      if (lhs == "schema_version") {
        c.schema_version = static_cast<int>(detail::parse_int(rhs));
        if (c.schema_version != config_schema_version)
          throw ConfigError("unsupported schema version " + std::to_string(c.schema_version));
        have_version = true;
      } else if (lhs == "kind") {
        c.kind = detail::trim(rhs);
      } else if (lhs == "master_seed") {
        const auto t = detail::trim(rhs);
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw ConfigError("bad master_seed '" + t + "'");
        c.master_seed = v;
      } else {
        const auto colon = lhs.find(':');
        if (colon == std::string::npos) throw ConfigError("parameter '" + lhs + "' needs a type (name: type = value)");
        const auto name = detail::trim(std::string_view(lhs).substr(0, colon));
        const auto type = parse_value_type(detail::trim(std::string_view(lhs).substr(colon + 1)));
        if (name.empty()) throw ConfigError("empty parameter name");
        if (c.params.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
        c.params[name] = parse_value(type, rhs);
      }
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_version) throw ConfigError("missing schema_version");
  if (c.kind.empty()) throw ConfigError("missing kind");
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

}  // namespace rbc
