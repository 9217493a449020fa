#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "benchgauge/error.hpp"

// Minimal RFC 4180 reader/writer: comma delimiter, double-quote quoting with
// "" escapes, LF or CRLF line endings, UTF-8 passed through untouched.

namespace bg::csv {

using Row = std::vector<std::string>;

/// Reads the next record. Returns false at end of input. Quoted fields may
/// span lines. `line` is advanced by the number of physical lines consumed.
inline bool read_row(std::istream& in, Row& row, std::size_t& line) {
  row.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  bool field_quoted = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      if (!field.empty()) throw SchemaError("stray quote in unquoted field on line " + std::to_string(line + 1));
      in_quotes = true;
      field_quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_quoted = false;
    } else if (ch == '\r') {
      if (in.peek() == '\n') continue;
      field.push_back(ch);
    } else if (ch == '\n') {
      ++line;
      row.push_back(std::move(field));
      return true;
    } else {
      if (field_quoted) throw SchemaError("text after closing quote on line " + std::to_string(line + 1));
      field.push_back(ch);
    }
  }
  if (in_quotes) throw SchemaError("unterminated quoted field");
  if (!any) return false;
  ++line;
  row.push_back(std::move(field));
  return true;
}

inline bool is_blank(const Row& row) { return row.size() == 1 && row[0].empty(); }

inline std::string quote(std::string_view field) {
  const bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << quote(row[i]);
  }
  out << '\n';
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  // from_chars rejects a leading '+', accept it for hand-written files.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

}  // namespace bg::csv
