// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "wsibench/error.hpp"

namespace wsibench::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(ErrorKind::MalformedRow, "missing column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split_line(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) fail(ErrorKind::MalformedRow, "unterminated quote on line " + std::to_string(lineno));
  out.push_back(std::move(field));
  return out;
}

}  // namespace

Table parse(std::string_view text) {
  Table table;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_line(line, lineno);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      fail(ErrorKind::MalformedRow, "line " + std::to_string(lineno) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(table.header.size()));
    table.rows.emplace_back(lineno, std::move(fields));
    if (end == text.size()) break;
  }
  if (!have_header) fail(ErrorKind::MalformedRow, "empty CSV input");
  return table;
}

Table read_file(const std::filesystem::path& path) { return parse(read_text(path)); }

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    fail(ErrorKind::MalformedRow,
         "line " + std::to_string(line) + ": not a number: '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text, std::size_t line) {
  long long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    fail(ErrorKind::MalformedRow,
         "line " + std::to_string(line) + ": not an integer: '" + std::string(text) + "'");
  return v;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace wsibench::csv
