#include "sclm/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "sclm/errors.hpp"

namespace sclm::corpus {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kTrainDir = "Training_Data_Master";
constexpr std::string_view kValidationDir = "Validation_Data_Master";
constexpr std::string_view kAttackDir = "Attack_Data_Master";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool want_dirs) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (want_dirs ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path require_dir(const fs::path& root, std::string_view name) {
  fs::path dir = root / name;
  if (!fs::is_directory(dir)) throw ConfigError("missing directory: " + dir.string());
  return dir;
}

RawTrace load_trace_file(const fs::path& file, const fs::path& root, TraceLabel label) {
  RawTrace trace;
  trace.source = fs::relative(file, root).generic_string();
  trace.calls = parse_calls(read_file(file), file.string());
  if (trace.calls.empty()) throw ParseError(file.string(), 0, "empty trace");
  trace.label = label;
  return trace;
}

}  // namespace

std::string_view to_string(TraceLabel label) {
  switch (label) {
    case TraceLabel::kNormalTrain: return "normal-train";
    case TraceLabel::kNormalValidation: return "normal-validation";
    case TraceLabel::kAttack: return "attack";
    case TraceLabel::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

TraceLabel parse_label(std::string_view text) {
  for (auto label : {TraceLabel::kNormalTrain, TraceLabel::kNormalValidation, TraceLabel::kAttack,
                     TraceLabel::kUnlabeled}) {
    if (text == to_string(label)) return label;
  }
  throw ConfigError("unknown trace label '" + std::string(text) + "'");
}

// SyscallVocab -----------------------------------------------------------

SyscallVocab::SyscallVocab(std::vector<CallId> raw_ids) : raw_(std::move(raw_ids)) {
  std::sort(raw_.begin(), raw_.end());
  raw_.erase(std::unique(raw_.begin(), raw_.end()), raw_.end());
}

std::optional<TokenIndex> SyscallVocab::find(CallId raw) const {
  auto it = std::lower_bound(raw_.begin(), raw_.end(), raw);
  if (it == raw_.end() || *it != raw) return std::nullopt;
  return static_cast<TokenIndex>(it - raw_.begin()) + kReserved;
}

CallId SyscallVocab::raw_of(TokenIndex index) const {
  if (index < kReserved || static_cast<std::size_t>(index) >= size()) {
    throw std::out_of_range("no raw call for index " + std::to_string(index));
  }
  return raw_[static_cast<std::size_t>(index - kReserved)];
}

// Loading ----------------------------------------------------------------

std::vector<CallId> parse_calls(std::string_view text, const std::string& where) {
  std::vector<CallId> calls;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (is_space(text[pos])) {
      ++pos;
      continue;
    }
    std::size_t end = pos;
    while (end < text.size() && !is_space(text[end])) ++end;
    CallId value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + end, value);
    if (ec != std::errc() || ptr != text.data() + end || value == 0) {
      throw ParseError(where, pos,
                       "expected positive integer, got '" + std::string(text.substr(pos, end - pos)) + "'");
    }
    calls.push_back(value);
    pos = end;
  }
  return calls;
}

std::vector<RawTrace> load_adfa_dir(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("missing directory: " + root.string());
  const fs::path train_dir = require_dir(root, kTrainDir);
  const fs::path val_dir = require_dir(root, kValidationDir);
  const fs::path attack_dir = require_dir(root, kAttackDir);

  std::vector<RawTrace> traces;
  for (const auto& file : sorted_entries(train_dir, false)) {
    traces.push_back(load_trace_file(file, root, TraceLabel::kNormalTrain));
  }
  for (const auto& file : sorted_entries(val_dir, false)) {
    traces.push_back(load_trace_file(file, root, TraceLabel::kNormalValidation));
  }
  for (const auto& type_dir : sorted_entries(attack_dir, true)) {
    for (const auto& file : sorted_entries(type_dir, false)) {
      RawTrace trace = load_trace_file(file, root, TraceLabel::kAttack);
      trace.attack_type = type_dir.filename().string();
      traces.push_back(std::move(trace));
    }
  }
  return traces;
}

std::vector<RawTrace> load_flat_file(const fs::path& path, TraceLabel label) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<RawTrace> traces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<CallId> calls;
    try {
      calls = parse_calls(line, path.string());
    } catch (const ParseError& e) {
      throw ParseError(path.string(), line_no, "malformed token at column " + std::to_string(e.position() + 1));
    }
    if (calls.empty()) continue;
    RawTrace trace;
    trace.calls = std::move(calls);
    trace.label = label;
    trace.source = path.filename().string() + ":" + std::to_string(line_no);
    traces.push_back(std::move(trace));
  }
  return traces;
}

LabelCounts count_labels(std::span<const RawTrace> traces) {
  LabelCounts counts;
  for (const auto& t : traces) {
    switch (t.label) {
      case TraceLabel::kNormalTrain: ++counts.normal_train; break;
      case TraceLabel::kNormalValidation: ++counts.normal_validation; break;
      case TraceLabel::kAttack: ++counts.attack; break;
      case TraceLabel::kUnlabeled: ++counts.unlabeled; break;
    }
  }
  return counts;
}

std::vector<RawTrace> select(std::span<const RawTrace> traces, TraceLabel label) {
  std::vector<RawTrace> out;
  std::copy_if(traces.begin(), traces.end(), std::back_inserter(out),
               [label](const RawTrace& t) { return t.label == label; });
  return out;
}

// Preparation ------------------------------------------------------------

std::pair<std::vector<RawTrace>, std::vector<RawTrace>> split_normal(
    std::vector<RawTrace> traces, unsigned train_parts, unsigned val_parts, std::uint64_t seed) {
  if (train_parts == 0 || val_parts == 0) throw ConfigError("split ratio parts must be positive");
  if (traces.size() < 2) throw ConfigError("split_normal needs at least 2 traces");
  for (const auto& t : traces) {
    if (t.label == TraceLabel::kAttack) throw ConfigError("split_normal given an attack trace: " + t.source);
  }

  std::mt19937_64 rng(seed);
  std::shuffle(traces.begin(), traces.end(), rng);

  const std::uint64_t n = traces.size();
  const std::uint64_t parts = std::uint64_t(train_parts) + val_parts;
  // round half up of n * train_parts / parts
  std::uint64_t n_train = (2 * n * train_parts + parts) / (2 * parts);
  n_train = std::clamp<std::uint64_t>(n_train, 1, n - 1);

  std::vector<RawTrace> train(std::make_move_iterator(traces.begin()),
                              std::make_move_iterator(traces.begin() + std::ptrdiff_t(n_train)));
  std::vector<RawTrace> validation(std::make_move_iterator(traces.begin() + std::ptrdiff_t(n_train)),
                                   std::make_move_iterator(traces.end()));
  for (auto& t : train) t.label = TraceLabel::kNormalTrain;
  for (auto& t : validation) t.label = TraceLabel::kNormalValidation;
  return {std::move(train), std::move(validation)};
}

SyscallVocab build_vocab(std::span<const RawTrace> traces) {
  if (traces.empty()) throw ConfigError("cannot build a vocabulary from no traces");
  std::vector<CallId> ids;
  for (const auto& t : traces) ids.insert(ids.end(), t.calls.begin(), t.calls.end());
  return SyscallVocab(std::move(ids));
}

EncodedTrace encode(const RawTrace& trace, const SyscallVocab& vocab, std::size_t& oov_count) {
  EncodedTrace out;
  out.indices.reserve(trace.calls.size() + 1);
  out.indices.push_back(SyscallVocab::kBos);
  for (CallId call : trace.calls) {
    auto index = vocab.find(call);
    if (!index) ++oov_count;
    out.indices.push_back(index.value_or(SyscallVocab::kUnk));
  }
  out.label = trace.label;
  out.source = trace.source;
  out.attack_type = trace.attack_type;
  return out;
}

EncodedSet encode_all(std::span<const RawTrace> traces, const SyscallVocab& vocab) {
  EncodedSet set;
  set.traces.reserve(traces.size());
  for (const auto& t : traces) {
    set.traces.push_back(encode(t, vocab, set.oov_calls));
    set.total_calls += t.calls.size();
  }
  return set;
}

std::vector<CallId> decode(const EncodedTrace& trace, const SyscallVocab& vocab) {
  std::vector<CallId> calls;
  for (std::size_t i = 1; i < trace.indices.size(); ++i) calls.push_back(vocab.raw_of(trace.indices[i]));
  return calls;
}

std::size_t Batch::real_count() const {
  return static_cast<std::size_t>(std::count(pad_mask.begin(), pad_mask.end(), std::uint8_t{1}));
}

Batch make_batch(std::span<const EncodedTrace> traces, std::span<const std::size_t> ids) {
  Batch batch;
  batch.rows = ids.size();
  batch.trace_ids.assign(ids.begin(), ids.end());
  for (std::size_t id : ids) {
    if (traces[id].indices.empty()) throw ConfigError("encoded trace without BOS: " + traces[id].source);
    batch.lengths.push_back(traces[id].prediction_count());
    batch.max_len = std::max(batch.max_len, batch.lengths.back());
  }
  const std::size_t rows = batch.rows;
  batch.inputs.assign((batch.max_len + 1) * rows, Batch::kPad);
  batch.targets.assign(batch.max_len * rows, Batch::kPad);
  batch.pad_mask.assign(batch.max_len * rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& idx = traces[ids[r]].indices;
    for (std::size_t t = 0; t < idx.size(); ++t) batch.inputs[t * rows + r] = idx[t];
    for (std::size_t t = 0; t + 1 < idx.size(); ++t) {
      batch.targets[t * rows + r] = idx[t + 1];
      batch.pad_mask[t * rows + r] = 1;
    }
  }
  return batch;
}

std::vector<Batch> make_batches(std::span<const EncodedTrace> traces, std::size_t batch_size,
                                std::uint64_t seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  std::vector<std::size_t> order(traces.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return traces[a].prediction_count() < traces[b].prediction_count();
  });

  std::vector<Batch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    batches.push_back(make_batch(traces, std::span(order).subspan(begin, end - begin)));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

// Synthetic corpora ------------------------------------------------------

void SynthConfig::validate() const {
  if (vocab_size < 4) throw ConfigError("synthetic vocab_size must be at least 4");
  if (min_len < 1 || min_len > max_len) throw ConfigError("synthetic length range must satisfy 1 <= min <= max");
}

TransitionGrammar TransitionGrammar::generate(std::size_t vocab_size, std::uint64_t grammar_seed) {
  constexpr double kPeak[] = {0.6, 0.25, 0.10};
  constexpr double kFloor = 0.05;

  TransitionGrammar g;
  g.vocab_size = vocab_size;
  g.start.assign(vocab_size, 1.0 / double(vocab_size));
  g.rows.resize(vocab_size);

  std::mt19937_64 rng(grammar_seed);
  std::vector<std::size_t> calls(vocab_size);
  std::iota(calls.begin(), calls.end(), 0);
  for (std::size_t c = 0; c < vocab_size; c += 2) {
    std::vector<double> row(vocab_size, kFloor / double(vocab_size));
    std::shuffle(calls.begin(), calls.end(), rng);
    for (std::size_t j = 0; j < 3; ++j) row[calls[j]] += kPeak[j];
    g.rows[c] = row;
    if (c + 1 < vocab_size) g.rows[c + 1] = row;
  }
  return g;
}

SynthCorpus gen_synthetic(const SynthConfig& config) {
  config.validate();
  const TransitionGrammar grammar = TransitionGrammar::generate(config.vocab_size, config.grammar_seed);

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> length(config.min_len, config.max_len);
  std::discrete_distribution<std::size_t> start(grammar.start.begin(), grammar.start.end());
  std::vector<std::discrete_distribution<std::size_t>> next;
  next.reserve(grammar.vocab_size);
  for (const auto& row : grammar.rows) next.emplace_back(row.begin(), row.end());

  SynthCorpus corpus;
  corpus.normals.reserve(config.n_normal);
  for (std::size_t n = 0; n < config.n_normal; ++n) {
    RawTrace trace;
    const std::size_t len = length(rng);
    std::size_t call = start(rng);
    trace.calls.push_back(CallId(call + 1));
    while (trace.calls.size() < len) {
      call = next[call](rng);
      trace.calls.push_back(CallId(call + 1));
    }
    trace.label = TraceLabel::kNormalTrain;
    trace.source = "normal-" + std::to_string(n);
    corpus.normals.push_back(std::move(trace));
  }

  std::uniform_int_distribution<CallId> uniform_call(1, CallId(config.vocab_size + config.attack_extra_calls));
  corpus.attacks.reserve(config.n_attack);
  for (std::size_t n = 0; n < config.n_attack; ++n) {
    RawTrace trace;
    const std::size_t len = length(rng);
    for (std::size_t i = 0; i < len; ++i) trace.calls.push_back(uniform_call(rng));
    trace.label = TraceLabel::kAttack;
    trace.source = "attack-" + std::to_string(n);
    trace.attack_type = "uniform";
    corpus.attacks.push_back(std::move(trace));
  }
  return corpus;
}

}  // namespace sclm::corpus
