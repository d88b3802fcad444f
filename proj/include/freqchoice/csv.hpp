#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include "freqchoice/types.hpp"

namespace freqchoice::csv {

// RFC 4180 field rules: fields may be quoted, quoted fields may contain
// commas, CR/LF, and doubled quotes. Records end at LF or CRLF.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline Table read(std::istream& in) {
  Table table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool any_char = false;  // current record has content

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    if (table.header.empty() && table.rows.empty()) {
      table.header = record;
    } else {
      table.rows.push_back(record);
    }
    record.clear();
    any_char = false;
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any_char = true;
        break;
      case ',':
        end_field();
        any_char = true;
        break;
      case '\r':
        break;  // handled by the following '\n'
      case '\n':
        if (any_char || !field.empty() || !record.empty()) end_record();
        break;
      default:
        field.push_back(c);
        any_char = true;
        break;
    }
  }
  if (in_quotes) throw DataError("CSV ends inside a quoted field");
  if (any_char || !field.empty() || !record.empty()) end_record();
  return table;
}

inline bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

inline void write_field(std::ostream& out, const std::string& s) {
  if (!needs_quoting(s)) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << "\"\"";
    else out << c;
  }
  out << '"';
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, bool& ok) {
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  // from_chars does not skip leading whitespace or '+'.
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  if (first < last && *first == '+') ++first;
  auto res = std::from_chars(first, last, value);
  const char* tail = res.ptr;
  while (tail < last && (*tail == ' ' || *tail == '\t' || *tail == '\r')) ++tail;
  ok = res.ec == std::errc{} && tail == last && first != last;
  return value;
}

}  // namespace freqchoice::csv
