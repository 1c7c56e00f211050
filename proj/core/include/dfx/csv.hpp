#pragma once

// Minimal comma-delimited text helpers. Fields never contain commas, quotes or
// newlines in any file this project reads or writes.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dfx::csv {

std::vector<std::string> split(std::string_view line, char delim = ',');

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Column index by name; throws Errc::parse when absent.
  std::size_t require(std::string_view name) const;
};

/// Reads a header line followed by data rows. Blank lines are skipped; rows
/// with the wrong field count throw Errc::parse.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text, std::string_view source = "<memory>");

/// Shortest decimal text that parses back to the same double.
std::string format(double v);
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

}  // namespace dfx::csv
