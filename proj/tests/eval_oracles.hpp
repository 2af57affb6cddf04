#pragma once

// Brute-force references for ROC analysis and the ensemble rules.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sclm/eval.hpp"

namespace sclm::testing {

// P(attack > normal) + 0.5 P(attack == normal), over all pairs.
inline double mann_whitney_auc(const std::vector<double>& normals, const std::vector<double>& attacks) {
  double wins = 0;
  for (double a : attacks) {
    for (double n : normals) wins += a > n ? 1.0 : (a == n ? 0.5 : 0.0);
  }
  return wins / (double(normals.size()) * double(attacks.size()));
}

// Every candidate threshold, counted directly; consecutive repeats of the
// same (far, dr) keep the first (largest) threshold.
inline eval::RocCurve brute_roc(const std::vector<double>& normals, const std::vector<double>& attacks) {
  std::vector<double> cands{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  cands.insert(cands.end(), normals.begin(), normals.end());
  cands.insert(cands.end(), attacks.begin(), attacks.end());
  std::sort(cands.begin(), cands.end(), [](double a, double b) { return a > b; });
  auto frac = [](const std::vector<double>& v, double theta) {
    std::size_t c = 0;
    for (double x : v) c += x > theta ? 1 : 0;
    return double(c) / double(v.size());
  };
  eval::RocCurve out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (i > 0 && cands[i] == cands[i - 1]) continue;
    eval::RocPoint p{frac(normals, cands[i]), frac(attacks, cands[i]), cands[i]};
    if (!out.points.empty() && out.points.back().far == p.far && out.points.back().dr == p.dr) continue;
    out.points.push_back(p);
  }
  return out;
}

// Score sets with deliberate ties: half the draws come from a small integer grid.
struct ScoreSets {
  std::vector<double> normals, attacks;
};

inline ScoreSets random_score_sets(std::mt19937_64& rng, std::size_t max_per_side = 1000) {
  std::uniform_int_distribution<std::size_t> size(1, max_per_side);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 8);
  std::bernoulli_distribution coarse(0.5);
  std::uniform_real_distribution<double> shift(-1.0, 2.0);
  const double mu = shift(rng);
  ScoreSets s;
  auto draw = [&](double mean) { return coarse(rng) ? double(grid(rng)) * 0.5 + mean : gauss(rng) + mean; };
  s.normals.resize(size(rng));
  for (auto& v : s.normals) v = draw(0.0);
  s.attacks.resize(size(rng));
  for (auto& v : s.attacks) v = draw(mu);
  return s;
}

inline bool same_points(const eval::RocCurve& a, const eval::RocCurve& b) {
  if (a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const auto& p = a.points[i];
    const auto& q = b.points[i];
    if (p.far != q.far || p.dr != q.dr || p.threshold != q.threshold) return false;
  }
  return true;
}

inline bool same_far_dr(const eval::RocCurve& a, const eval::RocCurve& b) {
  if (a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (a.points[i].far != b.points[i].far || a.points[i].dr != b.points[i].dr) return false;
  }
  return true;
}

}  // namespace sclm::testing
