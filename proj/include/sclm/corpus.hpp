#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sclm::corpus {

using CallId = std::uint32_t;      // raw system-call number as found in traces
using TokenIndex = std::int32_t;   // dense model index

enum class TraceLabel { kNormalTrain, kNormalValidation, kAttack, kUnlabeled };

std::string_view to_string(TraceLabel label);
/// Accepts the names produced by to_string; throws ConfigError otherwise.
TraceLabel parse_label(std::string_view text);

struct RawTrace {
  std::vector<CallId> calls;
  TraceLabel label = TraceLabel::kUnlabeled;
  std::string source;
  std::optional<std::string> attack_type;
};

/// Bijection between raw call ids and dense indices. Index 0 is BOS and
/// index 1 is UNK; real calls follow in ascending raw-id order.
class SyscallVocab {
 public:
  static constexpr TokenIndex kBos = 0;
  static constexpr TokenIndex kUnk = 1;
  static constexpr TokenIndex kReserved = 2;

  SyscallVocab() = default;
  /// `raw_ids` may be unsorted and contain duplicates.
  explicit SyscallVocab(std::vector<CallId> raw_ids);

  std::size_t size() const noexcept { return raw_.size() + kReserved; }
  std::size_t real_size() const noexcept { return raw_.size(); }

  std::optional<TokenIndex> find(CallId raw) const;
  /// UNK when `raw` is not in the vocabulary.
  TokenIndex index_of(CallId raw) const { return find(raw).value_or(kUnk); }
  /// Throws std::out_of_range for reserved or out-of-range indices.
  CallId raw_of(TokenIndex index) const;

  std::span<const CallId> raw_ids() const noexcept { return raw_; }

  friend bool operator==(const SyscallVocab&, const SyscallVocab&) = default;

 private:
  std::vector<CallId> raw_;  // sorted, unique
};

struct EncodedTrace {
  std::vector<TokenIndex> indices;  // indices[0] == kBos
  TraceLabel label = TraceLabel::kUnlabeled;
  std::string source;
  std::optional<std::string> attack_type;

  /// Number of next-call predictions, l.
  std::size_t prediction_count() const noexcept {
    return indices.empty() ? 0 : indices.size() - 1;
  }
};

/// Padded, length-bucketed group of traces.
///
/// Step t consumes `input(t, row)` and predicts `target(t, row)`. A row of
/// prediction count l has real steps t < l; `input(l, row)` is its final call,
/// consumed only to produce the trace representation. Padding uses kPad,
/// which lies outside the target set and embeds to zero.
struct Batch {
  static constexpr TokenIndex kPad = -1;

  std::size_t rows = 0;
  std::size_t max_len = 0;                // max prediction count
  std::vector<std::size_t> trace_ids;     // position in the source list
  std::vector<std::size_t> lengths;       // prediction count per row
  std::vector<TokenIndex> inputs;         // (max_len + 1) x rows, step-major
  std::vector<TokenIndex> targets;        // max_len x rows, step-major
  std::vector<std::uint8_t> pad_mask;     // max_len x rows, 1 at real positions

  TokenIndex input(std::size_t t, std::size_t row) const { return inputs[t * rows + row]; }
  TokenIndex target(std::size_t t, std::size_t row) const { return targets[t * rows + row]; }
  bool real(std::size_t t, std::size_t row) const { return pad_mask[t * rows + row] != 0; }
  std::size_t real_count() const;
};

// Loading ----------------------------------------------------------------

/// Reads an ADFA-LD style tree: Training_Data_Master/, Validation_Data_Master/
/// and Attack_Data_Master/<attack type>/. Files are visited in sorted order.
std::vector<RawTrace> load_adfa_dir(const std::filesystem::path& root);

/// One trace per line; blank lines are skipped.
std::vector<RawTrace> load_flat_file(const std::filesystem::path& path, TraceLabel label);

/// Whitespace-separated positive integers. `where` is used in error messages,
/// which carry the byte offset of the offending token.
std::vector<CallId> parse_calls(std::string_view text, const std::string& where);

struct LabelCounts {
  std::size_t normal_train = 0;
  std::size_t normal_validation = 0;
  std::size_t attack = 0;
  std::size_t unlabeled = 0;
};
LabelCounts count_labels(std::span<const RawTrace> traces);

std::vector<RawTrace> select(std::span<const RawTrace> traces, TraceLabel label);

// Preparation ------------------------------------------------------------

/// Seeded shuffle, then train size round(n * train_parts / (train_parts + val_parts)).
std::pair<std::vector<RawTrace>, std::vector<RawTrace>> split_normal(
    std::vector<RawTrace> traces, unsigned train_parts, unsigned val_parts, std::uint64_t seed);

SyscallVocab build_vocab(std::span<const RawTrace> traces);

/// Unknown calls map to UNK and bump `oov_count`.
EncodedTrace encode(const RawTrace& trace, const SyscallVocab& vocab, std::size_t& oov_count);

struct EncodedSet {
  std::vector<EncodedTrace> traces;
  std::size_t total_calls = 0;
  std::size_t oov_calls = 0;
  double oov_rate() const { return total_calls == 0 ? 0.0 : double(oov_calls) / double(total_calls); }
};
EncodedSet encode_all(std::span<const RawTrace> traces, const SyscallVocab& vocab);

/// Inverse of encode for traces without OOV; throws std::out_of_range otherwise.
std::vector<CallId> decode(const EncodedTrace& trace, const SyscallVocab& vocab);

/// Sort by prediction count, cut into consecutive groups of `batch_size`,
/// then shuffle group order with `seed`.
std::vector<Batch> make_batches(std::span<const EncodedTrace> traces, std::size_t batch_size,
                                std::uint64_t seed);

/// Batch from explicit trace positions, in the given order, no shuffling.
Batch make_batch(std::span<const EncodedTrace> traces, std::span<const std::size_t> ids);

// Synthetic corpora ------------------------------------------------------

struct SynthConfig {
  std::size_t vocab_size = 20;
  std::size_t n_normal = 1000;
  std::size_t n_attack = 200;
  std::size_t min_len = 20;
  std::size_t max_len = 60;
  std::uint64_t seed = 1;
  std::uint64_t grammar_seed = 7;
  /// Attacks may also draw from this many call ids beyond vocab_size.
  std::size_t attack_extra_calls = 0;

  void validate() const;
};

/// First-order generator for normal traces. Calls are raw ids 1..vocab_size.
/// Calls 2j+1 and 2j+2 share one successor distribution; every row puts
/// 0.95 of its mass on at most 3 successors and spreads the rest uniformly.
struct TransitionGrammar {
  std::size_t vocab_size = 0;
  std::vector<double> start;                  // vocab_size
  std::vector<std::vector<double>> rows;      // vocab_size x vocab_size, by raw id - 1

  static TransitionGrammar generate(std::size_t vocab_size, std::uint64_t grammar_seed);
};

struct SynthCorpus {
  std::vector<RawTrace> normals;  // labeled kNormalTrain until split
  std::vector<RawTrace> attacks;
};

SynthCorpus gen_synthetic(const SynthConfig& config);

}  // namespace sclm::corpus
