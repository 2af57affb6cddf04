#include <cmath>
#include <limits>
#include <string>

#include "sclm/errors.hpp"
#include "sclm/lm.hpp"

namespace sclm::lm {

AdamState AdamState::for_params(const LmParams& params) {
  AdamState s;
  s.m = LmParams::zeros(params.vocab_size(), params.width(), params.num_layers());
  s.v = LmParams::zeros(params.vocab_size(), params.width(), params.num_layers());
  return s;
}

void adam_update(LmParams& params, AdamState& state, const LmParams& grad, double lr) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  auto p = params.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  const auto g = grad.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      const double gi = g[t][i];
      const double mi = state.beta1 * m[t][i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * v[t][i] + (1.0 - state.beta2) * gi * gi;
      m[t][i] = float(mi);
      v[t][i] = float(vi);
      p[t][i] = float(p[t][i] - lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.epsilon));
    }
  }
}

StepStats train_step(LmParams& params, AdamState& state, const Batch& batch, const LmConfig& config,
                     Rng& rng, std::size_t batch_id) {
  auto lg = loss_and_gradient(params, batch, Dropout{config.dropout, true},
                              static_cast<std::size_t>(config.bptt_chunk), rng);
  StepStats stats;
  stats.loss = lg.loss;
  if (!std::isfinite(lg.loss)) {
    throw TrainingError("non-finite loss in batch " + std::to_string(batch_id));
  }
  stats.grad_norm = global_norm(lg.grad);
  if (!std::isfinite(stats.grad_norm)) {
    throw TrainingError("non-finite gradient norm in batch " + std::to_string(batch_id));
  }
  stats.clip_scale = clip_gradients(lg.grad, config.clip_norm);
  adam_update(params, state, lg.grad, config.lr);
  return stats;
}

LmModel train(const SyscallVocab& vocab, std::span<const EncodedTrace> train_traces,
              std::span<const EncodedTrace> validation_traces, const LmConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  if (train_traces.empty()) throw ConfigError("training set is empty");

  LmModel model{init_params(config, vocab), vocab, config, {}};
  if (config.epochs == 0) return model;

  AdamState adam = AdamState::for_params(model.params);
  // Dropout masks use their own stream so batch order and masks are decoupled.
  Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  double best = std::numeric_limits<double>::infinity();
  LmParams best_params = model.params;
  int stale = 0;
  std::size_t batch_id = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = corpus::make_batches(train_traces, static_cast<std::size_t>(config.batch_size),
                                              config.seed + static_cast<std::uint64_t>(epoch));
    double weighted = 0.0;
    std::size_t positions = 0;
    for (const auto& batch : batches) {
      const auto stats = train_step(model.params, adam, batch, config, dropout_rng, batch_id++);
      weighted += stats.loss * double(batch.real_count());
      positions += batch.real_count();
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = positions == 0 ? 0.0 : weighted / double(positions);
    if (validation_traces.empty()) {
      record.validation_nll = std::numeric_limits<double>::quiet_NaN();
      best_params = model.params;
    } else {
      record.validation_nll = mean_nll(model, validation_traces);
      if (record.validation_nll < best) {
        best = record.validation_nll;
        best_params = model.params;
        stale = 0;
      } else {
        ++stale;
      }
    }
    model.training_log.push_back(record);
    if (on_epoch) on_epoch(record);
    if (stale >= config.patience) break;
  }
  model.params = std::move(best_params);
  return model;
}

}  // namespace sclm::lm
