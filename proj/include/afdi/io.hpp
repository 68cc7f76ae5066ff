#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace afdi::io {

/// Whole-file read; throws kIo naming the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

using CsvRow = std::vector<std::string>;

/// Comma-separated, no quoting. Blank lines are skipped; cells are trimmed.
std::vector<CsvRow> parse_csv(std::string_view text);

std::vector<std::string> split(std::string_view text, char delimiter);
std::string_view trim(std::string_view text);

/// Resolves `path` against the directory containing `anchor_file` unless it
/// is already absolute.
std::string resolve_relative(const std::string& anchor_file, const std::string& path);

}  // namespace afdi::io
