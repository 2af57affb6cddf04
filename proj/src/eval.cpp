#include "sclm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sclm/errors.hpp"
#include "sclm/io.hpp"

namespace sclm::eval {

namespace {

std::vector<double> sorted_finite(std::span<const double> scores, const char* side) {
  if (scores.empty()) throw ConfigError(std::string("roc: no ") + side + " scores");
  std::vector<double> out(scores.begin(), scores.end());
  for (double s : out) {
    if (!std::isfinite(s)) throw ConfigError(std::string("roc: non-finite ") + side + " score");
  }
  std::sort(out.begin(), out.end());
  return out;
}

double fraction_above(const std::vector<double>& sorted, double threshold) {
  const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), threshold);
  return double(above) / double(sorted.size());
}

}  // namespace

RocCurve roc(std::span<const double> normal_scores, std::span<const double> attack_scores) {
  const auto normals = sorted_finite(normal_scores, "normal");
  const auto attacks = sorted_finite(attack_scores, "attack");

  std::vector<double> thresholds;
  thresholds.reserve(normals.size() + attacks.size() + 2);
  thresholds.push_back(std::numeric_limits<double>::infinity());
  thresholds.insert(thresholds.end(), normals.rbegin(), normals.rend());
  thresholds.insert(thresholds.end(), attacks.rbegin(), attacks.rend());
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  for (double theta : thresholds) {
    RocPoint p{fraction_above(normals, theta), fraction_above(attacks, theta), theta};
    if (!curve.points.empty() && curve.points.back().far == p.far && curve.points.back().dr == p.dr) continue;
    curve.points.push_back(p);
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.far - a.far) * (a.dr + b.dr) * 0.5;
  }
  return area;
}

double far_at_dr(const RocCurve& curve, double target_dr) {
  if (!(target_dr > 0.0 && target_dr <= 1.0)) throw ConfigError("target DR must lie in (0, 1]");
  constexpr double kSlack = 1e-12;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : curve.points) {
    if (p.dr + kSlack >= target_dr) best = std::min(best, p.far);
  }
  if (!std::isfinite(best)) throw ConfigError("target DR not reached by curve");
  return best;
}

EvalReport make_report(std::string method, const RocCurve& curve, std::size_t n_normal, std::size_t n_attack,
                       std::span<const double> targets) {
  EvalReport r;
  r.method = std::move(method);
  r.auc = auc(curve);
  for (double t : targets) r.far_at_dr.emplace_back(t, far_at_dr(curve, t));
  r.n_normal = n_normal;
  r.n_attack = n_attack;
  return r;
}

std::vector<EvalReport> compare(std::vector<EvalReport> reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
    if (a.auc != b.auc) return a.auc > b.auc;
    return a.method < b.method;
  });
  return reports;
}

std::string format_comparison(const std::vector<EvalReport>& rows) {
  std::ostringstream out;
  out << "method\tauc";
  if (!rows.empty()) {
    for (const auto& [target, far] : rows.front().far_at_dr) out << "\tfar@" << io::format_double(target);
  }
  out << "\tn_normal\tn_attack\n";
  for (const auto& r : rows) {
    out << r.method << '\t' << io::format_double(r.auc);
    for (const auto& [target, far] : r.far_at_dr) out << '\t' << io::format_double(far);
    out << '\t' << r.n_normal << '\t' << r.n_attack << '\n';
  }
  return out.str();
}

void write_roc(const std::filesystem::path& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "threshold\tfar\tdr\n";
  for (const auto& p : curve.points) {
    out << io::format_double(p.threshold) << '\t' << io::format_double(p.far) << '\t' << io::format_double(p.dr)
        << '\n';
  }
}

RocCurve read_roc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "threshold\tfar\tdr") {
    throw ParseError(path.string(), 1, "expected ROC header");
  }
  RocCurve curve;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string t, f, d;
    if (!(ls >> t >> f >> d)) throw ParseError(path.string(), line_no, "expected 3 fields");
    try {
      curve.points.push_back({io::parse_double(f), io::parse_double(d), io::parse_double(t)});
    } catch (const ConfigError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return curve;
}

void write_gnuplot(const std::filesystem::path& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# far dr\n";
  for (const auto& p : curve.points) out << io::format_double(p.far) << ' ' << io::format_double(p.dr) << '\n';
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  io::KeyValues kv{{"method", report.method},
                   {"auc", io::format_double(report.auc)},
                   {"n_normal", std::to_string(report.n_normal)},
                   {"n_attack", std::to_string(report.n_attack)}};
  for (const auto& [target, far] : report.far_at_dr) {
    kv.emplace_back("far_at_dr." + io::format_double(target), io::format_double(far));
  }
  io::write_key_values(path, kv);
}

}  // namespace sclm::eval
