#pragma once

// Shared building blocks of the LSTM forward pass. Internal to the library.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sclm/errors.hpp"
#include "sclm/lm.hpp"

namespace sclm::lm::detail {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void check_batch(const LmParamsT<T>& params, const Batch& batch) {
  const auto vocab = static_cast<corpus::TokenIndex>(params.vocab_size());
  for (corpus::TokenIndex tok : batch.inputs) {
    if (tok != Batch::kPad && (tok < 0 || tok >= vocab)) {
      throw ConfigError("token index " + std::to_string(tok) + " outside model vocabulary of size " +
                        std::to_string(vocab));
    }
  }
  for (corpus::TokenIndex tok : batch.targets) {
    if (tok != Batch::kPad && (tok < 0 || tok >= vocab)) {
      throw ConfigError("target index " + std::to_string(tok) + " outside model vocabulary of size " +
                        std::to_string(vocab));
    }
  }
}

/// Inverted dropout: entries are 0 or 1/(1-p). Column-major draw order.
template <typename T>
void draw_mask(Matrix<T>& mask, long rows, long cols, double p, Rng& rng) {
  mask.resize(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const T scale = T(1.0 / (1.0 - p));
  for (long i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : T(0);
}

/// Embedding lookup for step t; padding embeds to zero.
template <typename T>
void embed(const Matrix<T>& embedding, const Batch& batch, std::size_t t, Matrix<T>& x) {
  x.setZero(embedding.cols(), static_cast<long>(batch.rows));
  for (std::size_t r = 0; r < batch.rows; ++r) {
    const auto tok = batch.input(t, r);
    if (tok != Batch::kPad) x.col(long(r)) = embedding.row(tok).transpose();
  }
}

/// One LSTM step. `gates` receives the activated gates (i, f, g, o stacked).
template <typename T>
void lstm_step(const LstmLayer<T>& layer, const Matrix<T>& x, const Matrix<T>& h_prev,
               const Matrix<T>& c_prev, Matrix<T>& gates, Matrix<T>& c, Matrix<T>& h) {
  const long d = h_prev.rows();
  gates.noalias() = layer.w_input * x;
  gates.noalias() += layer.w_recurrent * h_prev;
  gates.colwise() += layer.bias;
  auto sig = [](T v) { return sigmoid(v); };
  gates.topRows(2 * d) = gates.topRows(2 * d).unaryExpr(sig);
  gates.middleRows(2 * d, d) = gates.middleRows(2 * d, d).array().tanh().matrix();
  gates.bottomRows(d) = gates.bottomRows(d).unaryExpr(sig);
  c = gates.middleRows(d, d).cwiseProduct(c_prev) + gates.topRows(d).cwiseProduct(gates.middleRows(2 * d, d));
  h = gates.bottomRows(d).cwiseProduct(c.array().tanh().matrix());
}

/// log-sum-exp of one logit column, in double.
template <typename T>
double log_sum_exp(const Matrix<T>& logits, long col) {
  double m = -INFINITY;
  for (long k = 0; k < logits.rows(); ++k) m = std::max(m, double(logits(k, col)));
  double s = 0.0;
  for (long k = 0; k < logits.rows(); ++k) s += std::exp(double(logits(k, col)) - m);
  return m + std::log(s);
}

/// Runs every input step t = 0..max_len. For t < max_len calls
/// `on_logits(t, logits)`. Returns the top-layer hidden state of each row
/// after consuming its last call.
template <typename T, typename OnLogits>
Matrix<T> run_network(const LmParamsT<T>& params, const Batch& batch, Dropout dropout, Rng& rng,
                      OnLogits&& on_logits) {
  check_batch(params, batch);
  const long d = params.width();
  const long rows = static_cast<long>(batch.rows);
  const int num_layers = params.num_layers();

  std::vector<Matrix<T>> h(num_layers, Matrix<T>::Zero(d, rows));
  std::vector<Matrix<T>> c(num_layers, Matrix<T>::Zero(d, rows));
  Matrix<T> x, gates, mask, c_new, h_new, logits;
  Matrix<T> final_states = Matrix<T>::Zero(d, rows);

  for (std::size_t t = 0; t <= batch.max_len; ++t) {
    embed(params.embedding, batch, t, x);
    if (dropout.enabled()) {
      draw_mask(mask, d, rows, dropout.p, rng);
      x = x.cwiseProduct(mask);
    }
    for (int l = 0; l < num_layers; ++l) {
      lstm_step(params.layers[l], x, h[l], c[l], gates, c_new, h_new);
      c[l].swap(c_new);
      h[l].swap(h_new);
      x = h[l];
      if (dropout.enabled()) {
        draw_mask(mask, d, rows, dropout.p, rng);
        x = x.cwiseProduct(mask);
      }
    }
    for (std::size_t r = 0; r < batch.rows; ++r) {
      if (batch.lengths[r] == t) final_states.col(long(r)) = h[num_layers - 1].col(long(r));
    }
    if (t < batch.max_len) {
      logits.noalias() = params.w_output * x;
      logits.colwise() += params.b_output;
      on_logits(t, static_cast<const Matrix<T>&>(logits));
    }
  }
  return final_states;
}

}  // namespace sclm::lm::detail
