#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sclm::eval {

struct RocPoint {
  double far = 0.0;        // fraction of normal-validation scores above threshold
  double dr = 0.0;         // fraction of attack scores above threshold
  double threshold = 0.0;  // abnormal iff score > threshold
};

/// Points ordered by (far, dr), both non-decreasing, from (0,0) to (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
};

/// Sweeps every distinct observed score plus +inf and -inf as the threshold.
/// Throws ConfigError if either side is empty or holds a non-finite score.
RocCurve roc(std::span<const double> normal_scores, std::span<const double> attack_scores);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

/// Smallest FAR among points whose DR reaches `target_dr`, 0 < target_dr <= 1.
double far_at_dr(const RocCurve& curve, double target_dr);

inline constexpr double kStandardTargets[] = {0.9, 0.99, 1.0};

struct EvalReport {
  std::string method;
  double auc = 0.0;
  std::vector<std::pair<double, double>> far_at_dr;  // (target DR, FAR)
  std::size_t n_normal = 0;
  std::size_t n_attack = 0;
};

EvalReport make_report(std::string method, const RocCurve& curve, std::size_t n_normal, std::size_t n_attack,
                       std::span<const double> targets = kStandardTargets);

/// Rows by descending AUC; equal AUCs ordered by method name.
std::vector<EvalReport> compare(std::vector<EvalReport> reports);

/// Tab-separated table: method, auc, far@<dr> columns for the first
/// report's targets, n_normal, n_attack.
std::string format_comparison(const std::vector<EvalReport>& rows);

/// `threshold<TAB>far<TAB>dr` with a header line.
void write_roc(const std::filesystem::path& path, const RocCurve& curve);
RocCurve read_roc(const std::filesystem::path& path);
/// Two whitespace-separated columns (far dr) with a `#` comment header.
void write_gnuplot(const std::filesystem::path& path, const RocCurve& curve);

void write_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace sclm::eval
