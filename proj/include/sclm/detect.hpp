#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sclm/eval.hpp"

namespace sclm::detect {

enum class Verdict { kNormal, kAbnormal };

/// normal iff f(x) <= theta.
struct ThresholdClassifier {
  std::string score_source;
  double theta = 0.0;
};

/// Throws ConfigError for non-finite input.
Verdict classify(const ThresholdClassifier& clf, double f_value);

inline constexpr double kDefaultSlope = 0.001;

inline double leaky_relu(double x, double slope = kDefaultSlope) { return x >= slope * x ? x : slope * x; }

/// Members of one ensemble must share a scale; NLL and distance scores never mix.
enum class ScoreKind { kNll, kDistance };

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view text);

struct EnsembleMember {
  std::string name;
  ScoreKind kind = ScoreKind::kNll;
};

/// f̄(x) = Σ weights[i] · σ(f_i(x) − biases[i]) with σ the leaky ReLU.
struct EnsembleSpec {
  std::vector<EnsembleMember> members;
  std::vector<double> weights;
  std::vector<double> biases;
  double slope = kDefaultSlope;

  std::size_t size() const { return members.size(); }
  /// Checks m >= 1, matching lengths, weights summing to 1, finite biases.
  void validate() const;
};

/// Mean of the two middle values for even counts.
double median(std::span<const double> values);

/// Biases are per-member medians of the normal-training scores, weights 1/m.
EnsembleSpec build_ensemble(std::vector<EnsembleMember> members,
                            const std::vector<std::vector<double>>& normal_train_scores,
                            double slope = kDefaultSlope);

double ensemble_score(const EnsembleSpec& spec, std::span<const double> member_values);

double average_score(std::span<const double> member_values);

/// Majority vote at matched quantiles. For each tau, member i's threshold is
/// the lower empirical tau-quantile of its normal scores; a trace is abnormal
/// when more than m/2 members score it above their threshold. The returned
/// curve carries tau in `threshold` and includes (0,0) and (1,1).
eval::RocCurve vote_curve(const std::vector<std::vector<double>>& member_normal,
                          const std::vector<std::vector<double>>& member_attack,
                          std::span<const double> quantile_grid);

/// Lower empirical quantile: the ceil(tau·n)-th smallest value (tau <= 0 gives the minimum).
double lower_quantile(std::span<const double> sorted_values, double tau);

/// Evenly spaced grid 0, 1/(n-1), ..., 1.
std::vector<double> uniform_grid(std::size_t n);

// Representation baselines ------------------------------------------------

using Point = std::vector<double>;

double euclidean(std::span<const double> a, std::span<const double> b);

/// Exact brute-force neighbours over the normal training representations.
class KnnIndex {
 public:
  /// Throws ConfigError unless 1 <= k <= points.size() and all points share a dimension.
  KnnIndex(std::vector<Point> points, std::size_t k);

  /// Radius to the k-th nearest point.
  double score(std::span<const double> query) const;
  /// 1 − (fraction of points within `radius`).
  double count_score(std::span<const double> query, double radius) const;

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::vector<Point> points_;
  std::size_t k_;
};

struct KmcModel {
  std::vector<Point> centers;
  std::size_t k = 0;
  double inertia = 0.0;                 // within-cluster sum of squares
  std::vector<double> inertia_history;  // per Lloyd iteration of the kept restart
  std::size_t iterations = 0;

  /// Distance to the nearest center.
  double score(std::span<const double> query) const;
};

inline constexpr std::size_t kDefaultRestarts = 10;
inline constexpr std::size_t kMaxLloydIterations = 300;

/// Lloyd's algorithm from `restarts` seeded random initialisations (k distinct
/// points each); keeps the lowest inertia. An emptied cluster is reseeded with
/// the point farthest from its assigned center.
KmcModel kmeans_fit(const std::vector<Point>& points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts = kDefaultRestarts);

// Persistence ------------------------------------------------------------

/// Plain-text spec: slope, then one `member` line per entry with its source,
/// score kind, weight and bias.
void write_ensemble_spec(const std::filesystem::path& path, const EnsembleSpec& spec);
EnsembleSpec read_ensemble_spec(const std::filesystem::path& path);

}  // namespace sclm::detect
