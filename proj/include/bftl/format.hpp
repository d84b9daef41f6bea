#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

namespace bftl {

// Numbers in every emitted file use 17 significant digits.
inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace detail {

inline void write_json_string(std::ostream& os, const std::string& s) {
  // nlohmann's dump escapes correctly; reuse it for strings only.
  os << nlohmann::json(s).dump();
}

inline void write_json(std::ostream& os, const nlohmann::ordered_json& j, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    os << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        newline(depth + 1);
        write_json_string(os, it.key());
        os << (indent < 0 ? ":" : ": ");
        write_json(os, it.value(), indent, depth + 1);
      }
      newline(depth);
      os << '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << '[';
      bool first = true;
      for (const auto& el : j) {
        if (!first) os << ',';
        first = false;
        newline(depth + 1);
        write_json(os, el, indent, depth + 1);
      }
      newline(depth);
      os << ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double x = j.get<double>();
      if (std::isfinite(x)) {
        os << format_number(x);
      } else {
        os << "null";
      }
      return;
    }
    default:
      os << j.dump();
      return;
  }
}

}  // namespace detail

// Serializes with insertion-ordered keys and %.17g floats; nonfinite floats become null.
inline std::string dump_json(const nlohmann::ordered_json& j, int indent = 2) {
  std::ostringstream os;
  detail::write_json(os, j, indent, 0);
  if (indent >= 0) os << '\n';
  return os.str();
}

}  // namespace bftl
