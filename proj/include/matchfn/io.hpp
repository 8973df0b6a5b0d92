#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace matchfn::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based line number in the source file for each row.
  std::vector<std::size_t> line_numbers;

  /// Column position, or header.size() when absent.
  std::size_t column(std::string_view name) const;
};

/// Comma-separated, header required, no quoting. Blank lines are skipped.
CsvTable read_csv(const std::filesystem::path& path);

/// Strict decimal parse ('.' separator, no thousands separators). Throws InputError.
double parse_number(std::string_view cell, std::string_view what);

/// Shortest representation that parses back to the same double.
std::string format_number(double value);

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace matchfn::io
