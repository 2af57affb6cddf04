#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eval_oracles.hpp"
#include "sclm/errors.hpp"
#include "sclm/eval.hpp"
#include "sclm/io.hpp"
#include "test_util.hpp"

using namespace sclm;
using namespace sclm::eval;
using sclm::testing::mann_whitney_auc;

TEST(Roc, PerfectSeparation) {
  const std::vector<double> n{0.1, 0.2, 0.3}, a{0.8, 0.9};
  const auto c = roc(n, a);
  EXPECT_EQ(auc(c), 1.0);
  EXPECT_EQ(far_at_dr(c, 0.9), 0.0);
  EXPECT_EQ(far_at_dr(c, 1.0), 0.0);
  EXPECT_EQ(c.points.front().far, 0.0);
  EXPECT_EQ(c.points.front().dr, 0.0);
  EXPECT_EQ(c.points.back().far, 1.0);
  EXPECT_EQ(c.points.back().dr, 1.0);
}

TEST(Roc, ReversedAndTied) {
  const std::vector<double> n{0.8, 0.9}, a{0.1, 0.2};
  EXPECT_EQ(auc(roc(n, a)), 0.0);
  const std::vector<double> same{1.0, 1.0};
  EXPECT_EQ(auc(roc(same, same)), 0.5);
  // One tie between the sides: the curve goes diagonally through it.
  EXPECT_DOUBLE_EQ(auc(roc(std::vector{1.0, 2.0}, std::vector{2.0, 3.0})), 0.875);
}

TEST(Roc, FarAtDetectionRate) {
  // normals 1..10, attacks 5.5 and 11..19: DR 0.9 is reached at theta 10, DR 1 only below 5.5.
  std::vector<double> n, a{5.5};
  for (int i = 1; i <= 10; ++i) n.push_back(i);
  for (int i = 11; i <= 19; ++i) a.push_back(i);
  const auto c = roc(n, a);
  EXPECT_DOUBLE_EQ(far_at_dr(c, 0.9), 0.0);
  EXPECT_DOUBLE_EQ(far_at_dr(c, 1.0), 0.5);
  EXPECT_THROW(far_at_dr(c, 0.0), ConfigError);
  EXPECT_THROW(roc(std::vector<double>{}, a), ConfigError);
  EXPECT_THROW(roc(n, std::vector{std::nan("")}), ConfigError);
}

TEST(Roc, OracleEquivalenceOnRandomSets) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = sclm::testing::random_score_sets(rng, 300);
    const auto c = roc(s.normals, s.attacks);
    EXPECT_NEAR(auc(c), mann_whitney_auc(s.normals, s.attacks), 1e-9);
    EXPECT_TRUE(sclm::testing::same_points(c, sclm::testing::brute_roc(s.normals, s.attacks)));
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_LE(c.points[i - 1].far, c.points[i].far);
      EXPECT_LE(c.points[i - 1].dr, c.points[i].dr);
    }
  }
}

TEST(Roc, InvariantUnderMonotoneTransformAndReversal) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = sclm::testing::random_score_sets(rng, 200);
    auto transform = [](std::vector<double> v, auto f) {
      for (auto& x : v) x = f(x);
      return v;
    };
    auto cube = [](double x) { return std::exp(x / 4) + 3; };
    auto neg = [](double x) { return -x; };
    const double base = auc(roc(s.normals, s.attacks));
    EXPECT_NEAR(auc(roc(transform(s.normals, cube), transform(s.attacks, cube))), base, 1e-12);
    EXPECT_NEAR(auc(roc(transform(s.normals, neg), transform(s.attacks, neg))), 1 - base, 1e-12);
  }
}

TEST(Report, CompareAndFormat) {
  const auto good = roc(std::vector{0.0, 1.0}, std::vector{2.0, 3.0});
  const auto half = roc(std::vector{1.0}, std::vector{1.0});
  auto rows = compare({make_report("b", half, 1, 1), make_report("z", good, 2, 2), make_report("a", half, 1, 1)});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].method, "z");
  EXPECT_EQ(rows[1].method, "a");
  EXPECT_EQ(rows[2].method, "b");
  ASSERT_EQ(rows[0].far_at_dr.size(), 3u);
  EXPECT_EQ(rows[0].far_at_dr[0].first, 0.9);

  const auto text = format_comparison(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), "method\tauc\tfar@0.9\tfar@0.99\tfar@1\tn_normal\tn_attack");
  EXPECT_NE(text.find("z\t1\t0\t0\t0\t2\t2"), std::string::npos);
}

TEST(Files, RocRoundTrip) {
  sclm::testing::TempDir dir("roc");
  std::mt19937_64 rng(1);
  const auto s = sclm::testing::random_score_sets(rng, 50);
  const auto c = roc(s.normals, s.attacks);
  write_roc(dir / "c.tsv", c);
  EXPECT_TRUE(sclm::testing::same_points(read_roc(dir / "c.tsv"), c));
  write_gnuplot(dir / "c.dat", c);
  const auto text = sclm::testing::read_text(dir / "c.dat");
  EXPECT_EQ(text.rfind("# far dr", 0), 0u);
}

TEST(Files, ScoreTable) {
  sclm::testing::TempDir dir("scores");
  std::vector<io::ScoreRow> rows{{"a/b.txt", corpus::TraceLabel::kNormalValidation, 1.25}, {"c", corpus::TraceLabel::kAttack, 0.1 + 0.2}};
  io::write_score_table(dir / "s.tsv", rows);
  const auto back = io::read_score_table(dir / "s.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].score, 0.1 + 0.2);
  EXPECT_EQ(back[0].trace_id, "a/b.txt");
  sclm::testing::write_text(dir / "bad.tsv", std::string(io::kScoreHeader) + "\nx\tattack\tnope\n");
  try {
    io::read_score_table(dir / "bad.tsv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 2u);
  }
}
