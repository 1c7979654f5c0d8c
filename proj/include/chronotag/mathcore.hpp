#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chronotag/matrix.hpp"
#include "chronotag/rng.hpp"

namespace chronotag {

double sigmoid(double x) noexcept;
std::vector<double> elementwise_sigmoid(std::span<const double> x);
std::vector<double> elementwise_tanh(std::span<const double> x);

// Max-subtracted softmax. Throws InvalidArgument on empty input.
std::vector<double> stable_softmax(std::span<const double> logits);
// log(softmax(logits)) via log-sum-exp, written into `out`.
void log_softmax(std::span<const double> logits, std::span<double> out);

// Glorot-uniform: i.i.d. U[-L, L], L = sqrt(6 / (rows + cols)).
Matrix xavier_init(std::size_t rows, std::size_t cols, Rng& rng);

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamHyper hyper = {});
  explicit AdamState(const Matrix& like, AdamHyper hyper = {}) : AdamState(like.rows(), like.cols(), hyper) {}

  const Matrix& first_moment() const noexcept { return m_; }
  const Matrix& second_moment() const noexcept { return v_; }
  std::uint64_t step() const noexcept { return step_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }
  AdamHyper& hyper() noexcept { return hyper_; }

 private:
  friend void adam_step(Matrix& params, const Matrix& grads, AdamState& state);
  Matrix m_;
  Matrix v_;
  std::uint64_t step_ = 0;
  AdamHyper hyper_;
};

// Bias-corrected Adam update applied in place.
//   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
void adam_step(Matrix& params, const Matrix& grads, AdamState& state);

// p <- p - lr * g
void sgd_step(Matrix& params, const Matrix& grads, double lr);

inline double xavier_bound(std::size_t rows, std::size_t cols) noexcept {
  return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

}  // namespace chronotag
