#include <algorithm>
#include <numeric>

#include "lstm_kernels.hpp"
#include "sclm/lm.hpp"

namespace sclm::lm {

namespace {

struct BatchResult {
  std::vector<double> nll_sum;  // per row
  Matrix<double> final_states;
};

BatchResult run_scoring(const LmParamsT<double>& params, const Batch& batch) {
  BatchResult result;
  result.nll_sum.assign(batch.rows, 0.0);
  Rng unused(0);
  result.final_states = detail::run_network(params, batch, Dropout{}, unused,
                                            [&](std::size_t t, const Matrix<double>& logits) {
                                              for (std::size_t r = 0; r < batch.rows; ++r) {
                                                if (!batch.real(t, r)) continue;
                                                const long col = static_cast<long>(r);
                                                result.nll_sum[r] += detail::log_sum_exp(logits, col) -
                                                                     logits(batch.target(t, r), col);
                                              }
                                            });
  return result;
}

/// Calls `fn(batch, result)` for length-sorted groups of `traces`.
template <typename Fn>
void for_each_batch(const LmModel& model, std::span<const EncodedTrace> traces, std::size_t batch_size,
                    Fn&& fn) {
  const auto params = model.params.cast<double>();
  std::vector<std::size_t> order(traces.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return traces[a].prediction_count() < traces[b].prediction_count();
  });
  batch_size = std::max<std::size_t>(1, batch_size);
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    const Batch batch = corpus::make_batch(traces, std::span(order).subspan(begin, end - begin));
    fn(batch, run_scoring(params, batch));
  }
}

}  // namespace

std::vector<SequenceScore> score_traces(const LmModel& model, std::span<const EncodedTrace> traces,
                                        std::size_t batch_size) {
  std::vector<SequenceScore> scores(traces.size());
  for_each_batch(model, traces, batch_size, [&](const Batch& batch, const BatchResult& result) {
    for (std::size_t r = 0; r < batch.rows; ++r) {
      auto& s = scores[batch.trace_ids[r]];
      s.trace_ref = traces[batch.trace_ids[r]].source;
      s.l = batch.lengths[r];
      s.f = s.l == 0 ? 0.0 : result.nll_sum[r] / double(s.l);
    }
  });
  return scores;
}

SequenceScore sequence_nll(const LmModel& model, const EncodedTrace& trace) {
  return score_traces(model, std::span(&trace, 1), 1).front();
}

double mean_nll(const LmModel& model, std::span<const EncodedTrace> traces, std::size_t batch_size) {
  double total = 0.0;
  std::size_t positions = 0;
  for_each_batch(model, traces, batch_size, [&](const Batch& batch, const BatchResult& result) {
    for (std::size_t r = 0; r < batch.rows; ++r) {
      total += result.nll_sum[r];
      positions += batch.lengths[r];
    }
  });
  return positions == 0 ? 0.0 : total / double(positions);
}

std::vector<Representation> representations(const LmModel& model, std::span<const EncodedTrace> traces,
                                            std::size_t batch_size) {
  std::vector<Representation> reps(traces.size());
  for_each_batch(model, traces, batch_size, [&](const Batch& batch, const BatchResult& result) {
    for (std::size_t r = 0; r < batch.rows; ++r) {
      auto& rep = reps[batch.trace_ids[r]];
      rep.trace_ref = traces[batch.trace_ids[r]].source;
      const auto col = result.final_states.col(long(r));
      rep.vector.assign(col.data(), col.data() + col.size());
    }
  });
  return reps;
}

Representation representation(const LmModel& model, const EncodedTrace& trace) {
  return representations(model, std::span(&trace, 1), 1).front();
}

std::vector<EmbeddingRow> export_embeddings(const LmModel& model) {
  std::vector<EmbeddingRow> rows;
  const auto& emb = model.params.embedding;
  for (std::size_t i = 0; i < model.vocab.real_size(); ++i) {
    const auto index = static_cast<long>(i) + SyscallVocab::kReserved;
    EmbeddingRow row;
    row.call = model.vocab.raw_ids()[i];
    row.values.resize(static_cast<std::size_t>(emb.cols()));
    for (long j = 0; j < emb.cols(); ++j) row.values[std::size_t(j)] = emb(index, j);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace sclm::lm
