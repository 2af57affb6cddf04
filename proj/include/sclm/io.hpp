#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sclm/corpus.hpp"

namespace sclm::io {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
/// Throws ConfigError on trailing garbage.
double parse_double(std::string_view text);

struct ScoreRow {
  std::string trace_id;
  corpus::TraceLabel label = corpus::TraceLabel::kUnlabeled;
  double score = 0.0;
};

inline constexpr std::string_view kScoreHeader = "trace_id\tlabel\tscore";

/// Header `trace_id<TAB>label<TAB>score`, one row per trace, LF endings.
void write_score_table(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_score_table(const std::filesystem::path& path);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; `#` starts a comment line.
void write_key_values(const std::filesystem::path& path, const KeyValues& entries);
KeyValues read_key_values(const std::filesystem::path& path);
/// First value stored under `key`, or empty.
std::string lookup(const KeyValues& entries, std::string_view key);

}  // namespace sclm::io
