#include "dfx/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dfx/error.hpp"

namespace dfx::csv {

std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::require(std::string_view name) const {
  if (auto c = column(name)) return *c;
  fail(Errc::parse, "missing column '" + std::string(name) + "'");
}

Table parse(std::string_view text, std::string_view source) {
  Table t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      fail(Errc::parse, std::string(source) + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) fail(Errc::parse, std::string(source) + ": missing header");
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string format(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail(Errc::parse, "bad number '" + std::string(s) + "' for " + std::string(what));
  return v;
}

long long parse_int(std::string_view s, std::string_view what) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail(Errc::parse, "bad integer '" + std::string(s) + "' for " + std::string(what));
  return v;
}

bool parse_bool(std::string_view s, std::string_view what) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  fail(Errc::parse, "bad boolean '" + std::string(s) + "' for " + std::string(what));
}

}  // namespace dfx::csv
