#pragma once

// Pipeline commands behind the `sclm` executable. Each command reads and
// writes files only, and records a manifest next to its primary output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sclm/corpus.hpp"
#include "sclm/detect.hpp"
#include "sclm/eval.hpp"
#include "sclm/io.hpp"
#include "sclm/lm.hpp"

namespace sclm::app {

namespace fs = std::filesystem;

/// Where traces come from. Any combination may be given; labels follow the
/// source (ADFA-LD directories, or the flag a flat file was passed under).
struct DataOptions {
  std::optional<fs::path> adfa_dir;
  std::vector<fs::path> train_flat;
  std::vector<fs::path> validation_flat;
  std::vector<fs::path> attack_flat;
  std::vector<fs::path> unlabeled_flat;
  /// Normal traces split into train/validation by `split_train:split_validation`.
  std::vector<fs::path> normal_flat;
  unsigned split_train = 1;
  unsigned split_validation = 5;
  std::uint64_t split_seed = 1;

  std::vector<corpus::RawTrace> load() const;
  void describe(io::KeyValues& manifest) const;
};

struct TrainOptions {
  DataOptions data;
  lm::LmConfig config;
  fs::path model_out;
  std::optional<fs::path> log_out;  // defaults to <model_out>.log.tsv
};

struct TrainResult {
  lm::LmModel model;
  double validation_oov_rate = 0.0;
};

TrainResult cmd_train(const TrainOptions& options, std::ostream& log);

struct ScoreOptions {
  fs::path model;
  DataOptions data;
  fs::path out;
  std::size_t batch_size = 32;
};

struct ScoreResult {
  std::vector<io::ScoreRow> rows;
  double oov_rate = 0.0;
};

ScoreResult cmd_score(const ScoreOptions& options, std::ostream& log);

struct EnsembleOptions {
  std::vector<fs::path> members;   // score tables over identical traces
  fs::path spec_out;
  fs::path scores_out;
  std::optional<fs::path> averaging_out;
  std::optional<fs::path> voting_out;  // ROC file
  std::size_t vote_grid = 201;
  double slope = detect::kDefaultSlope;
};

struct EnsembleResult {
  detect::EnsembleSpec spec;
  std::vector<io::ScoreRow> combined;
  std::vector<io::ScoreRow> averaged;
  std::optional<eval::RocCurve> vote;
};

EnsembleResult cmd_ensemble(const EnsembleOptions& options, std::ostream& log);

struct NamedPath {
  std::string name;
  fs::path path;
  /// `name=path`, or a bare path named after its stem.
  static NamedPath parse(const std::string& text);
};

struct EvaluateOptions {
  std::vector<NamedPath> tables;  // score tables
  std::vector<NamedPath> curves;  // precomputed ROC files
  fs::path out_dir;
};

std::vector<eval::EvalReport> cmd_evaluate(const EvaluateOptions& options, std::ostream& log);

enum class BaselineMethod { kKnn, kKmc };

struct BaselineOptions {
  fs::path model;
  DataOptions data;  // normal-train traces form the reference set; every trace is scored
  BaselineMethod method = BaselineMethod::kKnn;
  std::size_t k = 11;
  std::uint64_t seed = 1;
  std::size_t restarts = detect::kDefaultRestarts;
  fs::path out;
};

std::vector<io::ScoreRow> cmd_baseline(const BaselineOptions& options, std::ostream& log);

struct ExportOptions {
  fs::path model;
  fs::path out;
};

void cmd_export_embeddings(const ExportOptions& options, std::ostream& log);

struct SynthOptions {
  corpus::SynthConfig config;
  unsigned split_train = 1;
  unsigned split_validation = 1;
  fs::path out_dir;
  bool force = false;
};

void cmd_synth(const SynthOptions& options, std::ostream& log);

/// Overrides fields of `options` from `key = value` entries using the keys of
/// the synth manifest, so a corpus manifest can be replayed. Unknown keys throw.
void apply_synth_config(const io::KeyValues& entries, SynthOptions& options);

/// `<path>.manifest`
fs::path manifest_path(const fs::path& output);

}  // namespace sclm::app
