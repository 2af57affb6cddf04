#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sclm/corpus.hpp"

namespace sclm::lm {

using corpus::Batch;
using corpus::EncodedTrace;
using corpus::SyscallVocab;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

struct LmConfig {
  int num_layers = 1;
  int cells = 200;           // LSTM width; also the embedding dimension
  double lr = 1e-4;
  double clip_norm = 5.0;
  double dropout = 0.5;
  double init_range = 0.1;
  int epochs = 20;
  int bptt_chunk = 100;
  int batch_size = 64;
  int patience = 3;          // epochs without validation improvement before stopping
  std::uint64_t seed = 1;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  friend bool operator==(const LmConfig&, const LmConfig&) = default;
};

template <typename T>
struct LstmLayer {
  Matrix<T> w_input;      // 4d x d, gate rows ordered input, forget, candidate, output
  Matrix<T> w_recurrent;  // 4d x d
  Vector<T> bias;         // 4d
};

/// All trainable tensors. Storage is Eigen column-major; `tensors()` lists
/// them in the fixed order used by the model file.
template <typename T>
struct LmParamsT {
  Matrix<T> embedding;  // K x d, row k is the embedding of token k
  std::vector<LstmLayer<T>> layers;
  Matrix<T> w_output;   // K x d
  Vector<T> b_output;   // K

  static LmParamsT zeros(std::size_t vocab_size, int width, int num_layers);

  std::size_t vocab_size() const { return static_cast<std::size_t>(embedding.rows()); }
  int width() const { return static_cast<int>(embedding.cols()); }
  int num_layers() const { return static_cast<int>(layers.size()); }
  std::size_t parameter_count() const;

  std::vector<std::span<T>> tensors();
  std::vector<std::span<const T>> tensors() const;
  /// Names and shapes in `tensors()` order.
  std::vector<std::pair<std::string, std::pair<long, long>>> layout() const;

  template <typename U>
  LmParamsT<U> cast() const {
    LmParamsT<U> out;
    out.embedding = embedding.template cast<U>();
    for (const auto& l : layers) {
      out.layers.push_back({l.w_input.template cast<U>(), l.w_recurrent.template cast<U>(),
                            l.bias.template cast<U>()});
    }
    out.w_output = w_output.template cast<U>();
    out.b_output = b_output.template cast<U>();
    return out;
  }
};

using LmParams = LmParamsT<float>;

/// Every entry i.i.d. uniform on [-init_range, init_range], drawn from
/// `config.seed` in `tensors()` order.
LmParams init_params(const LmConfig& config, const SyscallVocab& vocab);

// Forward / backward -------------------------------------------------------

struct Dropout {
  double p = 0.0;
  bool active = false;
  bool enabled() const { return active && p > 0.0; }
};

template <typename T>
struct ForwardResult {
  std::vector<Matrix<T>> step_logits;  // one K x rows matrix per step t < max_len
  Matrix<T> final_states;              // d x rows, top-layer h after the last call
};

/// Runs the batch through the network. Dropout masks (embedding output and
/// every layer output) are drawn from `rng` step by step, so a copy of the
/// same generator reproduces them in `loss_and_gradient`.
template <typename T>
ForwardResult<T> forward(const LmParamsT<T>& params, const Batch& batch, Dropout dropout, Rng& rng);

/// Mean of -log softmax(target) over real positions; 0 when there are none.
template <typename T>
double nll_loss(const std::vector<Matrix<T>>& step_logits, const Batch& batch);

template <typename T>
struct LossGradient {
  double loss = 0.0;           // mean NLL over real positions, times loss_scale
  std::size_t positions = 0;
  LmParamsT<T> grad;
};

/// Exact gradient of `loss_scale * nll_loss` except that no gradient crosses
/// a multiple of `bptt_chunk` steps; the forward state is carried across.
template <typename T>
LossGradient<T> loss_and_gradient(const LmParamsT<T>& params, const Batch& batch, Dropout dropout,
                                  std::size_t bptt_chunk, Rng& rng, double loss_scale = 1.0);

template <typename T>
LmParamsT<T> backward(const LmParamsT<T>& params, const Batch& batch, Dropout dropout,
                      std::size_t bptt_chunk, Rng& rng) {
  return loss_and_gradient(params, batch, dropout, bptt_chunk, rng).grad;
}

// Optimisation -------------------------------------------------------------

struct AdamState {
  LmParams m;
  LmParams v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const LmParams& params);
};

/// Global L2 norm over every gradient entry, accumulated in double.
template <typename T>
double global_norm(const LmParamsT<T>& grad);

/// Scales `grad` by clip_norm / norm when norm exceeds clip_norm. Returns the
/// factor applied (1 when untouched).
template <typename T>
double clip_gradients(LmParamsT<T>& grad, double clip_norm);

void adam_update(LmParams& params, AdamState& state, const LmParams& grad, double lr);

struct StepStats {
  double loss = 0.0;
  double grad_norm = 0.0;   // before clipping
  double clip_scale = 1.0;
};

/// One clipped Adam step. Throws TrainingError naming `batch_id` if the loss
/// or gradient is not finite; parameters are left untouched in that case.
StepStats train_step(LmParams& params, AdamState& state, const Batch& batch, const LmConfig& config,
                     Rng& rng, std::size_t batch_id = 0);

// Model ----------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_nll = 0.0;  // NaN when no validation data was given
};

struct LmModel {
  LmParams params;
  SyscallVocab vocab;
  LmConfig config;
  std::vector<EpochRecord> training_log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains from `init_params(config, vocab)`. After each epoch the mean
/// validation NLL is measured with dropout off; the best snapshot is kept and
/// training stops after `config.patience` epochs without improvement.
LmModel train(const SyscallVocab& vocab, std::span<const EncodedTrace> train_traces,
              std::span<const EncodedTrace> validation_traces, const LmConfig& config,
              const EpochCallback& on_epoch = {});

// Scoring --------------------------------------------------------------------

struct SequenceScore {
  std::string trace_ref;
  double f = 0.0;         // average NLL, nats per call
  std::size_t l = 0;      // prediction count
};

struct Representation {
  std::string trace_ref;
  std::vector<double> vector;
};

/// Scoring runs the network in double precision with dropout off.
SequenceScore sequence_nll(const LmModel& model, const EncodedTrace& trace);
std::vector<SequenceScore> score_traces(const LmModel& model, std::span<const EncodedTrace> traces,
                                        std::size_t batch_size = 32);

/// Sum of NLL over all positions divided by the number of positions.
double mean_nll(const LmModel& model, std::span<const EncodedTrace> traces, std::size_t batch_size = 32);

Representation representation(const LmModel& model, const EncodedTrace& trace);
std::vector<Representation> representations(const LmModel& model, std::span<const EncodedTrace> traces,
                                            std::size_t batch_size = 32);

struct EmbeddingRow {
  corpus::CallId call = 0;
  std::vector<float> values;
};

/// One row per real call in ascending raw-id order.
std::vector<EmbeddingRow> export_embeddings(const LmModel& model);

// Persistence ----------------------------------------------------------------

/// Text header (format version, sizes, config, vocabulary, training log,
/// tensor table) terminated by a "data" line, then each tensor of
/// `LmParams::tensors()` as little-endian float32 in column-major order.
void save_model(const LmModel& model, std::ostream& out);
void save_model(const LmModel& model, const std::filesystem::path& path);
LmModel load_model(std::istream& in, const std::string& where = "<stream>");
LmModel load_model(const std::filesystem::path& path);

/// `key=value` pairs, space separated; also used by manifests.
std::string format_config(const LmConfig& config);
LmConfig parse_config(const std::string& text);

}  // namespace sclm::lm
