#include "sclm/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sclm/errors.hpp"
#include "sclm/io.hpp"

namespace sclm::detect {

Verdict classify(const ThresholdClassifier& clf, double f_value) {
  if (!std::isfinite(f_value)) throw ConfigError("classify: non-finite score from " + clf.score_source);
  return f_value <= clf.theta ? Verdict::kNormal : Verdict::kAbnormal;
}

std::string_view to_string(ScoreKind kind) { return kind == ScoreKind::kNll ? "nll" : "distance"; }

ScoreKind parse_score_kind(std::string_view text) {
  if (text == "nll") return ScoreKind::kNll;
  if (text == "distance") return ScoreKind::kDistance;
  throw ConfigError("unknown score kind '" + std::string(text) + "'");
}

// Ensembles ----------------------------------------------------------------

void EnsembleSpec::validate() const {
  if (members.empty()) throw ConfigError("ensemble needs at least one member");
  if (weights.size() != members.size() || biases.size() != members.size()) {
    throw ConfigError("ensemble weights/biases do not match member count");
  }
  for (const auto& m : members) {
    if (m.kind != members.front().kind) {
      throw ConfigError("ensemble mixes score kinds (" + std::string(to_string(m.kind)) + " vs " +
                        std::string(to_string(members.front().kind)) + "); scales differ");
    }
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("ensemble weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("ensemble weights must sum to 1");
  for (double b : biases) {
    if (!std::isfinite(b)) throw ConfigError("ensemble bias is not finite");
  }
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("leaky ReLU slope must lie in (0, 1)");
}

double median(std::span<const double> values) {
  if (values.empty()) throw ConfigError("median of empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EnsembleSpec build_ensemble(std::vector<EnsembleMember> members,
                            const std::vector<std::vector<double>>& normal_train_scores, double slope) {
  if (members.size() != normal_train_scores.size()) {
    throw ConfigError("build_ensemble: one score list per member required");
  }
  EnsembleSpec spec;
  spec.members = std::move(members);
  spec.slope = slope;
  const double m = double(spec.members.size());
  for (std::size_t i = 0; i < normal_train_scores.size(); ++i) {
    if (normal_train_scores[i].empty()) {
      throw ConfigError("build_ensemble: member '" + spec.members[i].name + "' has no scores");
    }
    spec.biases.push_back(median(normal_train_scores[i]));
    spec.weights.push_back(1.0 / m);
  }
  spec.validate();
  return spec;
}

double ensemble_score(const EnsembleSpec& spec, std::span<const double> member_values) {
  if (member_values.size() != spec.size()) {
    throw ConfigError("ensemble_score: expected " + std::to_string(spec.size()) + " member values, got " +
                      std::to_string(member_values.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < member_values.size(); ++i) {
    if (!std::isfinite(member_values[i])) throw ConfigError("ensemble_score: non-finite member value");
    total += spec.weights[i] * leaky_relu(member_values[i] - spec.biases[i], spec.slope);
  }
  return total;
}

double average_score(std::span<const double> member_values) {
  if (member_values.empty()) throw ConfigError("average_score: no member values");
  return std::accumulate(member_values.begin(), member_values.end(), 0.0) / double(member_values.size());
}

double lower_quantile(std::span<const double> sorted_values, double tau) {
  if (sorted_values.empty()) throw ConfigError("quantile of empty list");
  const double n = double(sorted_values.size());
  const double rank = std::ceil(tau * n) - 1.0;
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 0.0, n - 1.0));
  return sorted_values[idx];
}

std::vector<double> uniform_grid(std::size_t n) {
  if (n < 2) return {1.0};
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = double(i) / double(n - 1);
  return grid;
}

eval::RocCurve vote_curve(const std::vector<std::vector<double>>& member_normal,
                          const std::vector<std::vector<double>>& member_attack,
                          std::span<const double> quantile_grid) {
  if (quantile_grid.empty()) throw ConfigError("vote_curve: empty quantile grid");
  const std::size_t m = member_normal.size();
  if (m == 0 || member_attack.size() != m) throw ConfigError("vote_curve: member lists do not match");
  const std::size_t n_normal = member_normal.front().size();
  const std::size_t n_attack = member_attack.front().size();
  if (n_normal == 0 || n_attack == 0) throw ConfigError("vote_curve: empty score list");
  for (std::size_t i = 0; i < m; ++i) {
    if (member_normal[i].size() != n_normal || member_attack[i].size() != n_attack) {
      throw ConfigError("vote_curve: members must score the same traces");
    }
  }

  std::vector<std::vector<double>> sorted_normal = member_normal;
  for (auto& s : sorted_normal) std::sort(s.begin(), s.end());

  auto abnormal_fraction = [m](const std::vector<std::vector<double>>& scores, const std::vector<double>& theta) {
    const std::size_t n = scores.front().size();
    std::size_t abnormal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t votes = 0;
      for (std::size_t i = 0; i < m; ++i) votes += scores[i][j] > theta[i] ? 1 : 0;
      if (2 * votes > m) ++abnormal;
    }
    return double(abnormal) / double(n);
  };

  eval::RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::vector<double> theta(m);
  for (double tau : quantile_grid) {
    for (std::size_t i = 0; i < m; ++i) theta[i] = lower_quantile(sorted_normal[i], tau);
    curve.points.push_back({abnormal_fraction(member_normal, theta), abnormal_fraction(member_attack, theta), tau});
  }
  curve.points.push_back({1.0, 1.0, -std::numeric_limits<double>::infinity()});
  std::stable_sort(curve.points.begin(), curve.points.end(), [](const eval::RocPoint& a, const eval::RocPoint& b) {
    return a.far != b.far ? a.far < b.far : a.dr < b.dr;
  });
  return curve;
}

// Representation baselines ------------------------------------------------

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("dimension mismatch in distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

void check_dimensions(const std::vector<Point>& points) {
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw ConfigError("points have differing dimensions");
  }
}

double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

KnnIndex::KnnIndex(std::vector<Point> points, std::size_t k) : points_(std::move(points)), k_(k) {
  if (k_ < 1 || k_ > points_.size()) {
    throw ConfigError("kNN k=" + std::to_string(k_) + " outside [1, " + std::to_string(points_.size()) + "]");
  }
  check_dimensions(points_);
}

double KnnIndex::score(std::span<const double> query) const {
  std::vector<double> dist;
  dist.reserve(points_.size());
  for (const auto& p : points_) dist.push_back(euclidean(query, p));
  std::nth_element(dist.begin(), dist.begin() + std::ptrdiff_t(k_ - 1), dist.end());
  return dist[k_ - 1];
}

double KnnIndex::count_score(std::span<const double> query, double radius) const {
  if (!(radius >= 0.0)) throw ConfigError("kNN radius must be non-negative");
  std::size_t inside = 0;
  for (const auto& p : points_) inside += euclidean(query, p) <= radius ? 1 : 0;
  return 1.0 - double(inside) / double(points_.size());
}

double KmcModel::score(std::span<const double> query) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : centers) best = std::min(best, euclidean(query, c));
  return best;
}

namespace {

struct Assignment {
  std::vector<std::size_t> labels;
  std::vector<double> sq_dist;
  double inertia = 0.0;
};

Assignment assign(const std::vector<Point>& points, const std::vector<Point>& centers) {
  Assignment a;
  a.labels.resize(points.size());
  a.sq_dist.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t label = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = squared_distance(points[i], centers[c]);
      if (d < best) {
        best = d;
        label = c;
      }
    }
    a.labels[i] = label;
    a.sq_dist[i] = best;
    a.inertia += best;
  }
  return a;
}

KmcModel lloyd(const std::vector<Point>& points, std::size_t k, std::uint64_t seed) {
  const std::size_t dim = points.front().size();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }

  KmcModel model;
  model.k = k;
  for (std::size_t i = 0; i < k; ++i) model.centers.push_back(points[idx[i]]);
  Assignment current = assign(points, model.centers);
  model.inertia_history.push_back(current.inertia);

  for (std::size_t iter = 0; iter < kMaxLloydIterations; ++iter) {
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[current.labels[i]];
      for (std::size_t j = 0; j < dim; ++j) s[j] += points[i][j];
      ++counts[current.labels[i]];
    }
    std::vector<bool> taken(points.size(), false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) model.centers[c][j] = sums[c][j] / double(counts[c]);
        continue;
      }
      std::size_t far = 0;
      double far_dist = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (!taken[i] && current.sq_dist[i] > far_dist) {
          far_dist = current.sq_dist[i];
          far = i;
        }
      }
      taken[far] = true;
      model.centers[c] = points[far];
    }
    Assignment next = assign(points, model.centers);
    model.inertia_history.push_back(next.inertia);
    ++model.iterations;
    const bool fixpoint = next.labels == current.labels;
    current = std::move(next);
    if (fixpoint) break;
  }
  model.inertia = current.inertia;
  return model;
}

}  // namespace

KmcModel kmeans_fit(const std::vector<Point>& points, std::size_t k, std::uint64_t seed, std::size_t restarts) {
  if (k < 1 || k > points.size()) {
    throw ConfigError("k-means k=" + std::to_string(k) + " outside [1, " + std::to_string(points.size()) + "]");
  }
  check_dimensions(points);
  KmcModel best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, restarts); ++r) {
    KmcModel model = lloyd(points, k, seed + 0x9e3779b97f4a7c15ULL * r);
    if (model.inertia < best.inertia) best = std::move(model);
  }
  return best;
}

// Persistence ------------------------------------------------------------

void write_ensemble_spec(const std::filesystem::path& path, const EnsembleSpec& spec) {
  spec.validate();
  io::KeyValues kv{{"format", "sclm-ensemble 1"},
                   {"slope", io::format_double(spec.slope)},
                   {"members", std::to_string(spec.size())}};
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const std::string p = "member." + std::to_string(i);
    kv.emplace_back(p + ".source", spec.members[i].name);
    kv.emplace_back(p + ".kind", std::string(to_string(spec.members[i].kind)));
    kv.emplace_back(p + ".weight", io::format_double(spec.weights[i]));
    kv.emplace_back(p + ".bias", io::format_double(spec.biases[i]));
  }
  io::write_key_values(path, kv);
}

EnsembleSpec read_ensemble_spec(const std::filesystem::path& path) {
  const auto kv = io::read_key_values(path);
  if (io::lookup(kv, "format") != "sclm-ensemble 1") throw ParseError(path.string(), 1, "not an ensemble spec");
  auto require = [&](const std::string& key) {
    std::string v = io::lookup(kv, key);
    if (v.empty()) throw ParseError(path.string(), 0, "missing key " + key);
    return v;
  };
  EnsembleSpec spec;
  spec.slope = io::parse_double(require("slope"));
  const std::size_t m = std::stoul(require("members"));
  for (std::size_t i = 0; i < m; ++i) {
    const std::string p = "member." + std::to_string(i);
    spec.members.push_back({require(p + ".source"), parse_score_kind(require(p + ".kind"))});
    spec.weights.push_back(io::parse_double(require(p + ".weight")));
    spec.biases.push_back(io::parse_double(require(p + ".bias")));
  }
  spec.validate();
  return spec;
}

}  // namespace sclm::detect
