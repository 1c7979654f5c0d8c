#include "chronotag/mathcore.hpp"

#include <algorithm>
#include <cmath>

#include "chronotag/errors.hpp"

namespace chronotag {

double sigmoid(double x) noexcept {
  // Branch keeps exp() argument non-positive.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> elementwise_sigmoid(std::span<const double> x) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return sigmoid(v); });
  return out;
}

std::vector<double> elementwise_tanh(std::span<const double> x) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return std::tanh(v); });
  return out;
}

std::vector<double> stable_softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("stable_softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  if (logits.empty()) throw InvalidArgument("log_softmax: empty input");
  if (out.size() != logits.size()) throw InvalidArgument("log_softmax: output size mismatch");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

Matrix xavier_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw InvalidArgument("xavier_init: zero dimension");
  const double bound = xavier_bound(rows, cols);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = bound * (2.0 * rng.uniform() - 1.0);
  return m;
}

AdamState::AdamState(std::size_t rows, std::size_t cols, AdamHyper hyper)
    : m_(rows, cols), v_(rows, cols), hyper_(hyper) {}

void adam_step(Matrix& params, const Matrix& grads, AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.m_)) {
    throw InvalidArgument("adam_step: shape mismatch");
  }
  const auto& h = state.hyper_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  auto p = params.data();
  auto g = grads.data();
  auto m = state.m_.data();
  auto v = state.v_.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    p[i] -= h.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.epsilon);
  }
}

void sgd_step(Matrix& params, const Matrix& grads, double lr) {
  if (!params.same_shape(grads)) throw InvalidArgument("sgd_step: shape mismatch");
  auto p = params.data();
  auto g = grads.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

}  // namespace chronotag
