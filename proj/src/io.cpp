#include "sclm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sclm/errors.hpp"

namespace sclm::io {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

void write_score_table(const fs::path& path, const std::vector<ScoreRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << kScoreHeader << '\n';
  for (const auto& row : rows) {
    out << row.trace_id << '\t' << corpus::to_string(row.label) << '\t' << format_double(row.score) << '\n';
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

std::vector<ScoreRow> read_score_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kScoreHeader) {
    throw ParseError(path.string(), 1, "expected score table header");
  }
  std::vector<ScoreRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos || line.find('\t', tab2 + 1) != std::string::npos) {
      throw ParseError(path.string(), line_no, "expected 3 tab-separated fields");
    }
    try {
      ScoreRow row;
      row.trace_id = line.substr(0, tab1);
      row.label = corpus::parse_label(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1));
      row.score = parse_double(std::string_view(line).substr(tab2 + 1));
      rows.push_back(std::move(row));
    } catch (const ConfigError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return rows;
}

void write_key_values(const fs::path& path, const KeyValues& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
  if (!out) throw ConfigError("write failed: " + path.string());
}

KeyValues read_key_values(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  KeyValues entries;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), line_no, "expected key = value");
    entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return entries;
}

std::string lookup(const KeyValues& entries, std::string_view key) {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  return {};
}

}  // namespace sclm::io
