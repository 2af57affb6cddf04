#include <cmath>
#include <random>

#include "lstm_kernels.hpp"
#include "sclm/errors.hpp"
#include "sclm/lm.hpp"

namespace sclm::lm {

// LmConfig ------------------------------------------------------------------

void LmConfig::validate() const {
  if (num_layers < 1 || num_layers > 2) throw ConfigError("num_layers must be 1 or 2");
  if (cells < 1) throw ConfigError("cells must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(init_range >= 0.0)) throw ConfigError("init_range must be non-negative");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (bptt_chunk < 1) throw ConfigError("bptt_chunk must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
}

// LmParamsT -----------------------------------------------------------------

template <typename T>
LmParamsT<T> LmParamsT<T>::zeros(std::size_t vocab_size, int width, int num_layers) {
  const long k = static_cast<long>(vocab_size);
  const long d = width;
  LmParamsT p;
  p.embedding = Matrix<T>::Zero(k, d);
  for (int l = 0; l < num_layers; ++l) {
    p.layers.push_back({Matrix<T>::Zero(4 * d, d), Matrix<T>::Zero(4 * d, d), Vector<T>::Zero(4 * d)});
  }
  p.w_output = Matrix<T>::Zero(k, d);
  p.b_output = Vector<T>::Zero(k);
  return p;
}

template <typename T>
std::size_t LmParamsT<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

template <typename T>
std::vector<std::span<T>> LmParamsT<T>::tensors() {
  auto view = [](auto& m) { return std::span<T>(m.data(), static_cast<std::size_t>(m.size())); };
  std::vector<std::span<T>> out{view(embedding)};
  for (auto& l : layers) {
    out.push_back(view(l.w_input));
    out.push_back(view(l.w_recurrent));
    out.push_back(view(l.bias));
  }
  out.push_back(view(w_output));
  out.push_back(view(b_output));
  return out;
}

template <typename T>
std::vector<std::span<const T>> LmParamsT<T>::tensors() const {
  auto view = [](const auto& m) { return std::span<const T>(m.data(), static_cast<std::size_t>(m.size())); };
  std::vector<std::span<const T>> out{view(embedding)};
  for (const auto& l : layers) {
    out.push_back(view(l.w_input));
    out.push_back(view(l.w_recurrent));
    out.push_back(view(l.bias));
  }
  out.push_back(view(w_output));
  out.push_back(view(b_output));
  return out;
}

template <typename T>
std::vector<std::pair<std::string, std::pair<long, long>>> LmParamsT<T>::layout() const {
  std::vector<std::pair<std::string, std::pair<long, long>>> out;
  out.push_back({"embedding", {embedding.rows(), embedding.cols()}});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    out.push_back({prefix + "w_input", {layers[l].w_input.rows(), layers[l].w_input.cols()}});
    out.push_back({prefix + "w_recurrent", {layers[l].w_recurrent.rows(), layers[l].w_recurrent.cols()}});
    out.push_back({prefix + "bias", {layers[l].bias.rows(), 1}});
  }
  out.push_back({"w_output", {w_output.rows(), w_output.cols()}});
  out.push_back({"b_output", {b_output.rows(), 1}});
  return out;
}

LmParams init_params(const LmConfig& config, const SyscallVocab& vocab) {
  config.validate();
  LmParams p = LmParams::zeros(vocab.size(), config.cells, config.num_layers);
  Rng rng(config.seed);
  std::uniform_real_distribution<double> uniform(-config.init_range, config.init_range);
  for (auto tensor : p.tensors()) {
    for (float& w : tensor) w = static_cast<float>(uniform(rng));
  }
  return p;
}

// Forward ---------------------------------------------------------------------

template <typename T>
ForwardResult<T> forward(const LmParamsT<T>& params, const Batch& batch, Dropout dropout, Rng& rng) {
  ForwardResult<T> out;
  out.step_logits.reserve(batch.max_len);
  out.final_states = detail::run_network(params, batch, dropout, rng, [&](std::size_t, const Matrix<T>& logits) {
    out.step_logits.push_back(logits);
  });
  return out;
}

template <typename T>
double nll_loss(const std::vector<Matrix<T>>& step_logits, const Batch& batch) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < batch.max_len; ++t) {
    for (std::size_t r = 0; r < batch.rows; ++r) {
      if (!batch.real(t, r)) continue;
      const long col = static_cast<long>(r);
      total += detail::log_sum_exp(step_logits[t], col) - double(step_logits[t](batch.target(t, r), col));
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / double(count);
}

// Backward --------------------------------------------------------------------

namespace {

template <typename T>
struct StepCache {
  Matrix<T> x;      // layer input after dropout
  Matrix<T> gates;  // activated i, f, g, o
  Matrix<T> c;
  Matrix<T> h;
};

}  // namespace

template <typename T>
LossGradient<T> loss_and_gradient(const LmParamsT<T>& params, const Batch& batch, Dropout dropout,
                                  std::size_t bptt_chunk, Rng& rng, double loss_scale) {
  detail::check_batch(params, batch);
  const long d = params.width();
  const long rows = static_cast<long>(batch.rows);
  const int num_layers = params.num_layers();
  const std::size_t steps = batch.max_len;
  const std::size_t chunk = std::max<std::size_t>(1, bptt_chunk);

  LossGradient<T> out;
  out.grad = LmParamsT<T>::zeros(params.vocab_size(), params.width(), num_layers);
  out.positions = batch.real_count();
  if (out.positions == 0) return out;
  const double scale = loss_scale / double(out.positions);

  std::vector<Matrix<T>> h(num_layers, Matrix<T>::Zero(d, rows));
  std::vector<Matrix<T>> c(num_layers, Matrix<T>::Zero(d, rows));
  double total = 0.0;

  Matrix<T> x, logits, dlogits, dx, dh, dc, da;
  for (std::size_t start = 0; start < steps; start += chunk) {
    const std::size_t len = std::min(chunk, steps - start);
    const std::vector<Matrix<T>> h0 = h;
    const std::vector<Matrix<T>> c0 = c;
    std::vector<std::vector<StepCache<T>>> cache(len, std::vector<StepCache<T>>(num_layers));
    std::vector<Matrix<T>> input_mask(dropout.enabled() ? len : 0);
    std::vector<std::vector<Matrix<T>>> output_mask(dropout.enabled() ? len : 0,
                                                    std::vector<Matrix<T>>(num_layers));
    std::vector<Matrix<T>> d_top(len);

    // Forward through the chunk, folding the output layer in immediately.
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t t = start + k;
      detail::embed(params.embedding, batch, t, x);
      if (dropout.enabled()) {
        detail::draw_mask(input_mask[k], d, rows, dropout.p, rng);
        x = x.cwiseProduct(input_mask[k]);
      }
      for (int l = 0; l < num_layers; ++l) {
        auto& sc = cache[k][l];
        sc.x = x;
        detail::lstm_step(params.layers[l], x, h[l], c[l], sc.gates, sc.c, sc.h);
        h[l] = sc.h;
        c[l] = sc.c;
        x = sc.h;
        if (dropout.enabled()) {
          detail::draw_mask(output_mask[k][l], d, rows, dropout.p, rng);
          x = x.cwiseProduct(output_mask[k][l]);
        }
      }

      logits.noalias() = params.w_output * x;
      logits.colwise() += params.b_output;
      dlogits.setZero(logits.rows(), rows);
      for (std::size_t r = 0; r < batch.rows; ++r) {
        if (!batch.real(t, r)) continue;
        const long col = static_cast<long>(r);
        const auto target = batch.target(t, r);
        const double lse = detail::log_sum_exp(logits, col);
        total += lse - double(logits(target, col));
        for (long j = 0; j < logits.rows(); ++j) {
          dlogits(j, col) = T(std::exp(double(logits(j, col)) - lse) * scale);
        }
        dlogits(target, col) -= T(scale);
      }
      out.grad.w_output.noalias() += dlogits * x.transpose();
      out.grad.b_output += dlogits.rowwise().sum();
      d_top[k].noalias() = params.w_output.transpose() * dlogits;
    }

    // Backward through the chunk; nothing flows past its first step.
    std::vector<Matrix<T>> dh_next(num_layers, Matrix<T>::Zero(d, rows));
    std::vector<Matrix<T>> dc_next(num_layers, Matrix<T>::Zero(d, rows));
    for (std::size_t k = len; k-- > 0;) {
      const std::size_t t = start + k;
      dx = d_top[k];
      for (int l = num_layers - 1; l >= 0; --l) {
        const auto& sc = cache[k][l];
        const Matrix<T>& h_prev = k == 0 ? h0[l] : cache[k - 1][l].h;
        const Matrix<T>& c_prev = k == 0 ? c0[l] : cache[k - 1][l].c;
        const auto in_gate = sc.gates.topRows(d).array();
        const auto forget = sc.gates.middleRows(d, d).array();
        const auto cand = sc.gates.middleRows(2 * d, d).array();
        const auto out_gate = sc.gates.bottomRows(d).array();

        if (dropout.enabled()) dx = dx.cwiseProduct(output_mask[k][l]);
        dh = dx + dh_next[l];
        const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> tanh_c = sc.c.array().tanh();
        dc = (dh.array() * out_gate * (T(1) - tanh_c.square())).matrix() + dc_next[l];

        da.resize(4 * d, rows);
        da.topRows(d) = (dc.array() * cand * in_gate * (T(1) - in_gate)).matrix();
        da.middleRows(d, d) = (dc.array() * c_prev.array() * forget * (T(1) - forget)).matrix();
        da.middleRows(2 * d, d) = (dc.array() * in_gate * (T(1) - cand.square())).matrix();
        da.bottomRows(d) = (dh.array() * tanh_c * out_gate * (T(1) - out_gate)).matrix();
        dc_next[l] = (dc.array() * forget).matrix();

        auto& g = out.grad.layers[l];
        g.w_input.noalias() += da * sc.x.transpose();
        g.w_recurrent.noalias() += da * h_prev.transpose();
        g.bias += da.rowwise().sum();
        dh_next[l].noalias() = params.layers[l].w_recurrent.transpose() * da;
        dx.noalias() = params.layers[l].w_input.transpose() * da;
      }
      if (dropout.enabled()) dx = dx.cwiseProduct(input_mask[k]);
      for (std::size_t r = 0; r < batch.rows; ++r) {
        const auto tok = batch.input(t, r);
        if (tok != Batch::kPad) out.grad.embedding.row(tok) += dx.col(long(r)).transpose();
      }
    }
  }
  out.loss = total * scale;
  return out;
}

// Clipping --------------------------------------------------------------------

template <typename T>
double global_norm(const LmParamsT<T>& grad) {
  double sq = 0.0;
  for (const auto& tensor : grad.tensors()) {
    for (T g : tensor) sq += double(g) * double(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_gradients(LmParamsT<T>& grad, double clip_norm) {
  const double norm = global_norm(grad);
  if (!(norm > clip_norm)) return 1.0;
  const double factor = clip_norm / norm;
  for (auto tensor : grad.tensors()) {
    for (T& g : tensor) g = T(double(g) * factor);
  }
  return factor;
}

#define SCLM_INSTANTIATE(T)                                                                           \
  template struct LmParamsT<T>;                                                                       \
  template ForwardResult<T> forward<T>(const LmParamsT<T>&, const Batch&, Dropout, Rng&);             \
  template double nll_loss<T>(const std::vector<Matrix<T>>&, const Batch&);                           \
  template LossGradient<T> loss_and_gradient<T>(const LmParamsT<T>&, const Batch&, Dropout,           \
                                                std::size_t, Rng&, double);                           \
  template double global_norm<T>(const LmParamsT<T>&);                                                \
  template double clip_gradients<T>(LmParamsT<T>&, double);

SCLM_INSTANTIATE(float)
SCLM_INSTANTIATE(double)

#undef SCLM_INSTANTIATE

}  // namespace sclm::lm
