#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include "sclm/corpus.hpp"
#include "sclm/errors.hpp"
#include "test_util.hpp"

using namespace sclm;
using namespace sclm::corpus;
using sclm::testing::TempDir;
using sclm::testing::write_text;

namespace {

RawTrace make_trace(std::vector<CallId> calls, TraceLabel label = TraceLabel::kNormalTrain,
                    std::string source = "t") {
  RawTrace t;
  t.calls = std::move(calls);
  t.label = label;
  t.source = std::move(source);
  return t;
}

// Empirical conditional entropy H(next | current) in nats.
double conditional_entropy(const std::vector<RawTrace>& traces) {
  std::map<std::pair<CallId, CallId>, double> pair_counts;
  std::map<CallId, double> from_counts;
  double total = 0;
  for (const auto& t : traces) {
    for (std::size_t i = 1; i < t.calls.size(); ++i) {
      pair_counts[{t.calls[i - 1], t.calls[i]}] += 1;
      from_counts[t.calls[i - 1]] += 1;
      total += 1;
    }
  }
  double h = 0;
  for (const auto& [key, c] : pair_counts) h += c / total * std::log(from_counts[key.first] / c);
  return h;
}

}  // namespace

TEST(Vocab, ReservedIndicesAndSortedIds) {
  const auto vocab = build_vocab(std::vector{make_trace({7, 3}), make_trace({7, 11})});
  EXPECT_EQ(vocab.size(), 5u);
  EXPECT_EQ(vocab.index_of(3), 2);
  EXPECT_EQ(vocab.index_of(7), 3);
  EXPECT_EQ(vocab.index_of(11), 4);
  EXPECT_EQ(vocab.index_of(999), SyscallVocab::kUnk);
  EXPECT_THROW(vocab.raw_of(SyscallVocab::kBos), std::out_of_range);
  EXPECT_THROW(vocab.raw_of(SyscallVocab::kUnk), std::out_of_range);
  for (TokenIndex i = SyscallVocab::kReserved; i < TokenIndex(vocab.size()); ++i) {
    EXPECT_EQ(vocab.index_of(vocab.raw_of(i)), i);
  }
}

TEST(Vocab, SingleCallTrace) {
  EXPECT_EQ(build_vocab(std::vector{make_trace({5})}).size(), 3u);
  EXPECT_THROW(build_vocab(std::vector<RawTrace>{}), ConfigError);
}

TEST(Encode, PrependsBosAndCountsOov) {
  const SyscallVocab vocab({3, 7});
  std::size_t oov = 0;
  auto enc = encode(make_trace({3, 7}), vocab, oov);
  EXPECT_EQ(enc.indices, (std::vector<TokenIndex>{SyscallVocab::kBos, 2, 3}));
  EXPECT_EQ(oov, 0u);

  enc = encode(make_trace({3, 999}), vocab, oov);
  EXPECT_EQ(enc.indices, (std::vector<TokenIndex>{SyscallVocab::kBos, 2, SyscallVocab::kUnk}));
  EXPECT_EQ(oov, 1u);
  EXPECT_THROW(decode(enc, vocab), std::out_of_range);
}

TEST(Encode, RoundTripWithoutOov) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<CallId> call(1, 400);
  std::uniform_int_distribution<std::size_t> len(1, 50);
  std::vector<RawTrace> traces;
  for (int i = 0; i < 100; ++i) {
    std::vector<CallId> calls(len(rng));
    for (auto& c : calls) c = call(rng);
    traces.push_back(make_trace(calls));
  }
  const auto vocab = build_vocab(traces);
  const auto set = encode_all(traces, vocab);
  EXPECT_EQ(set.oov_calls, 0u);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& enc = set.traces[i];
    ASSERT_EQ(enc.indices.front(), SyscallVocab::kBos);
    for (std::size_t j = 1; j < enc.indices.size(); ++j) {
      EXPECT_NE(enc.indices[j], SyscallVocab::kBos);
      EXPECT_LT(std::size_t(enc.indices[j]), vocab.size());
    }
    EXPECT_EQ(decode(enc, vocab), traces[i].calls);
  }
}

TEST(Parse, Tokenization) {
  EXPECT_EQ(parse_calls("6 6 63 6 42\n", "f").size(), 5u);
  EXPECT_TRUE(parse_calls("  \n", "f").empty());
  try {
    parse_calls("1 2 x3", "trace.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.where(), "trace.txt");
    EXPECT_EQ(e.position(), 4u);
  }
  EXPECT_THROW(parse_calls("1 0 2", "f"), ParseError);
  EXPECT_THROW(parse_calls("1 -2", "f"), ParseError);
  EXPECT_THROW(parse_calls("99999999999", "f"), ParseError);
}

TEST(FlatFile, LinesBecomeTraces) {
  TempDir dir("flat");
  write_text(dir / "a.txt", "1 2 3\n4 5\n");
  const auto traces = load_flat_file(dir / "a.txt", TraceLabel::kAttack);
  ASSERT_EQ(traces.size(), 2u);
  EXPECT_EQ(traces[0].calls.size(), 3u);
  EXPECT_EQ(traces[1].calls.size(), 2u);
  EXPECT_EQ(traces[1].label, TraceLabel::kAttack);

  write_text(dir / "empty.txt", "");
  EXPECT_TRUE(load_flat_file(dir / "empty.txt", TraceLabel::kAttack).empty());

  write_text(dir / "blank.txt", "1 2\n\n3\n");
  EXPECT_EQ(load_flat_file(dir / "blank.txt", TraceLabel::kUnlabeled).size(), 2u);

  write_text(dir / "bad.txt", "1 2\n3 four\n");
  try {
    load_flat_file(dir / "bad.txt", TraceLabel::kUnlabeled);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 2u);
  }
  EXPECT_THROW(load_flat_file(dir / "missing.txt", TraceLabel::kUnlabeled), ConfigError);
}

TEST(AdfaLoader, LayoutAndLabels) {
  TempDir dir("adfa");
  write_text(dir / "Training_Data_Master/UTD-0002.txt", "6 6 63 6 42\n");
  write_text(dir / "Training_Data_Master/UTD-0001.txt", "1 2\n");
  write_text(dir / "Validation_Data_Master/UVD-0001.txt", "3 4 5\n");
  write_text(dir / "Attack_Data_Master/Adduser_1/UAD-Adduser-1-1.txt", "9 9\n");
  write_text(dir / "Attack_Data_Master/Hydra_FTP_1/UAD-Hydra-FTP-1-1.txt", "8\n");

  const auto traces = load_adfa_dir(dir.path());
  const auto counts = count_labels(traces);
  EXPECT_EQ(counts.normal_train, 2u);
  EXPECT_EQ(counts.normal_validation, 1u);
  EXPECT_EQ(counts.attack, 2u);
  EXPECT_EQ(traces[0].source, "Training_Data_Master/UTD-0001.txt");
  EXPECT_EQ(traces[1].calls.size(), 5u);
  EXPECT_EQ(traces[3].attack_type, "Adduser_1");
  EXPECT_EQ(traces[4].attack_type, "Hydra_FTP_1");

  const auto again = load_adfa_dir(dir.path());
  ASSERT_EQ(again.size(), traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) EXPECT_EQ(again[i].source, traces[i].source);
}

TEST(AdfaLoader, EmptyAttackGroupAndErrors) {
  TempDir dir("adfa-empty");
  write_text(dir / "Training_Data_Master/a.txt", "1\n");
  write_text(dir / "Validation_Data_Master/b.txt", "1\n");
  std::filesystem::create_directories(dir / "Attack_Data_Master");
  const auto counts = count_labels(load_adfa_dir(dir.path()));
  EXPECT_EQ(counts.attack, 0u);
  EXPECT_EQ(counts.normal_train, 1u);
  EXPECT_EQ(counts.normal_validation, 1u);

  std::filesystem::remove_all(dir / "Validation_Data_Master");
  try {
    load_adfa_dir(dir.path());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("Validation_Data_Master"), std::string::npos);
  }

  std::filesystem::create_directories(dir / "Validation_Data_Master");
  write_text(dir / "Validation_Data_Master/bad.txt", "1 2 zz\n");
  try {
    load_adfa_dir(dir.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 4u);
    EXPECT_NE(e.where().find("bad.txt"), std::string::npos);
  }
}

// Counts from the public dataset; runs only when ADFA_LD_ROOT is set.
TEST(AdfaLoader, PublicDatasetCounts) {
  const char* root = std::getenv("ADFA_LD_ROOT");
  if (root == nullptr) GTEST_SKIP() << "ADFA_LD_ROOT not set";
  const auto counts = count_labels(load_adfa_dir(root));
  EXPECT_EQ(counts.normal_train, 833u);
  EXPECT_EQ(counts.normal_validation, 4372u);
  EXPECT_EQ(counts.attack, 746u);
}

TEST(Split, RatioAndDeterminism) {
  std::vector<RawTrace> six;
  for (CallId i = 1; i <= 6; ++i) six.push_back(make_trace({i}, TraceLabel::kNormalTrain, std::to_string(i)));
  auto [train, val] = split_normal(six, 1, 5, 42);
  EXPECT_EQ(train.size(), 1u);
  EXPECT_EQ(val.size(), 5u);
  EXPECT_EQ(train[0].label, TraceLabel::kNormalTrain);
  EXPECT_EQ(val[0].label, TraceLabel::kNormalValidation);

  std::vector<RawTrace> many;
  for (CallId i = 1; i <= 6823; ++i) many.push_back(make_trace({i}, TraceLabel::kNormalTrain, std::to_string(i)));
  auto [t1, v1] = split_normal(many, 1, 5, 7);
  EXPECT_EQ(t1.size(), 1137u);
  EXPECT_EQ(v1.size(), 5686u);

  auto [t2, v2] = split_normal(many, 1, 5, 7);
  for (std::size_t i = 0; i < t1.size(); ++i) EXPECT_EQ(t1[i].source, t2[i].source);

  std::multiset<std::string> seen;
  for (const auto& t : t1) seen.insert(t.source);
  for (const auto& t : v1) seen.insert(t.source);
  EXPECT_EQ(seen.size(), many.size());
  EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), many.size());

  EXPECT_THROW(split_normal({make_trace({1})}, 1, 5, 1), ConfigError);
  EXPECT_THROW(split_normal(six, 0, 5, 1), ConfigError);
}

TEST(Batches, SortThenGroup) {
  std::vector<EncodedTrace> traces;
  for (std::size_t len : {2, 9, 3, 8}) {
    EncodedTrace t;
    t.indices.assign(len + 1, 2);
    t.indices[0] = SyscallVocab::kBos;
    traces.push_back(t);
  }
  const auto batches = make_batches(traces, 2, 5);
  ASSERT_EQ(batches.size(), 2u);
  std::set<std::multiset<std::size_t>> groups;
  for (const auto& b : batches) groups.insert({b.lengths.begin(), b.lengths.end()});
  EXPECT_TRUE(groups.count({2, 3}));
  EXPECT_TRUE(groups.count({8, 9}));

  for (const auto& b : batches) {
    for (std::size_t t = 0; t < b.max_len; ++t) {
      for (std::size_t r = 0; r < b.rows; ++r) {
        EXPECT_EQ(b.real(t, r), t < b.lengths[r]);
        EXPECT_EQ(b.target(t, r) == Batch::kPad, !b.real(t, r));
      }
    }
  }

  std::size_t real = 0;
  for (const auto& b : make_batches(traces, 1, 5)) {
    EXPECT_EQ(b.rows, 1u);
    EXPECT_EQ(b.real_count(), b.max_len);
    real += b.real_count();
  }
  EXPECT_EQ(real, 2u + 9 + 3 + 8);
  EXPECT_THROW(make_batches(traces, 0, 1), ConfigError);
}

TEST(Batches, RealPositionsSumToTotalLength) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> len(1, 40);
  std::vector<EncodedTrace> traces(57);
  std::size_t total = 0;
  for (auto& t : traces) {
    const std::size_t l = len(rng);
    t.indices.assign(l + 1, 2);
    t.indices[0] = SyscallVocab::kBos;
    total += l;
  }
  for (std::size_t bs : {1, 4, 10, 64}) {
    std::size_t real = 0;
    for (const auto& b : make_batches(traces, bs, 1)) real += b.real_count();
    EXPECT_EQ(real, total) << "batch size " << bs;
  }
}

TEST(Synthetic, DeterministicAndSeparable) {
  SynthConfig config;
  const auto a = gen_synthetic(config);
  const auto b = gen_synthetic(config);
  ASSERT_EQ(a.normals.size(), config.n_normal);
  ASSERT_EQ(a.attacks.size(), config.n_attack);
  for (std::size_t i = 0; i < a.normals.size(); ++i) EXPECT_EQ(a.normals[i].calls, b.normals[i].calls);
  for (std::size_t i = 0; i < a.attacks.size(); ++i) EXPECT_EQ(a.attacks[i].calls, b.attacks[i].calls);

  for (const auto& t : a.normals) {
    EXPECT_GE(t.calls.size(), config.min_len);
    EXPECT_LE(t.calls.size(), config.max_len);
    for (CallId c : t.calls) {
      EXPECT_GE(c, 1u);
      EXPECT_LE(c, config.vocab_size);
    }
  }
  EXPECT_LT(conditional_entropy(a.normals), conditional_entropy(a.attacks));

  config.n_attack = 0;
  EXPECT_TRUE(gen_synthetic(config).attacks.empty());
  config.vocab_size = 3;
  EXPECT_THROW(gen_synthetic(config), ConfigError);
}

TEST(Synthetic, GrammarRowsArePeakedAndShared) {
  const auto g = TransitionGrammar::generate(20, 7);
  for (std::size_t c = 0; c < g.vocab_size; ++c) {
    double sum = 0;
    int high = 0;
    for (double p : g.rows[c]) {
      sum += p;
      high += p > 0.05 ? 1 : 0;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_LE(high, 3);
    if (c % 2 == 0) EXPECT_EQ(g.rows[c], g.rows[c + 1]);
  }
}

TEST(Labels, RoundTrip) {
  for (auto l : {TraceLabel::kNormalTrain, TraceLabel::kNormalValidation, TraceLabel::kAttack, TraceLabel::kUnlabeled}) {
    EXPECT_EQ(parse_label(to_string(l)), l);
  }
  EXPECT_THROW(parse_label("benign"), ConfigError);
}
