// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wsibench::csv {

struct Table {
  std::vector<std::string> header;
  // Each row carries its 1-based line number for error messages.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;

  // Index of a header column; throws MalformedRow if absent.
  std::size_t column(std::string_view name) const;
};

// Minimal RFC-4180 reader: comma separated, optional double quotes, CRLF
// tolerated, blank lines skipped.
Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text, std::size_t line);
long long parse_int(std::string_view text, std::size_t line);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace wsibench::csv
