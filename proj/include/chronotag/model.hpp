#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronotag/embeddings.hpp"
#include "chronotag/matrix.hpp"
#include "chronotag/rng.hpp"

namespace chronotag {

enum class Architecture { lstm, feedforward };

std::string_view to_string(Architecture arch) noexcept;
Architecture parse_architecture(std::string_view name);  // "lstm" | "ff" | "feedforward"

struct ModelConfig {
  Architecture architecture = Architecture::lstm;
  bool use_year = true;
  std::size_t word_dim = 300;
  std::size_t year_dim = 300;
  std::size_t hidden = 512;
  std::size_t tag_count = 0;
  std::size_t max_len = 50;

  std::size_t input_width() const noexcept { return word_dim + (use_year ? year_dim : 0); }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// All model parameters. The word table is shared and immutable; everything
// else is trainable.
//
// LSTM: hidden_weights is (4H) x (input_width + H) acting on [input; h_prev],
// gate blocks in row order [input, forget, candidate, output].
// Feedforward: hidden_weights is H x input_width, activation tanh.
struct TaggerParams {
  std::shared_ptr<const WordTable> words;
  YearTable years;
  Matrix hidden_weights;
  Matrix hidden_bias;  // 1 x rows(hidden_weights)
  Matrix output_weights;  // K x H
  Matrix output_bias;     // 1 x K
};

// Glorot-uniform for every weight block and the year table; zero biases except
// the LSTM forget gate, which starts at 1.
TaggerParams init_params(const ModelConfig& config, std::shared_ptr<const WordTable> words, YearRange years,
                         Rng& rng);

void check_shapes(const TaggerParams& params, const ModelConfig& config);

struct GradientSet {
  Matrix years;
  Matrix hidden_weights;
  Matrix hidden_bias;
  Matrix output_weights;
  Matrix output_bias;

  static GradientSet zeros_like(const TaggerParams& params);
  void set_zero() noexcept;
  GradientSet& operator+=(const GradientSet& other);
  void scale(double factor) noexcept;
  double squared_norm() const noexcept;
  bool all_finite() const noexcept;
};

struct LstmStepResult {
  std::vector<double> h;
  std::vector<double> c;
  std::vector<double> gates;  // activated [i, f, g, o]
};

LstmStepResult lstm_step(const TaggerParams& params, const ModelConfig& config, std::span<const double> input,
                         std::span<const double> h_prev, std::span<const double> c_prev);

// Cached activations of one sentence, rows indexed by position.
struct ForwardTrace {
  Architecture architecture = Architecture::lstm;
  bool use_year = false;
  int year = 0;
  Matrix inputs;     // T x input_width
  Matrix gates;      // LSTM only: T x 4H activated gates
  Matrix cells;      // LSTM only: T x H
  Matrix hidden;     // T x H
  Matrix log_probs;  // T x K

  std::size_t length() const noexcept { return log_probs.rows(); }
};

ForwardTrace forward(const TaggerParams& params, const ModelConfig& config, std::span<const int> tokens,
                     int year);

// Mask with 1 for every position whose gold tag is known.
std::vector<std::uint8_t> known_tag_mask(std::span<const int> gold);

// Mean over unmasked positions of -log p(gold).
double loss(const Matrix& log_probs, std::span<const int> gold, std::span<const std::uint8_t> mask);

// Adds `weight` times the gradient of the summed (not averaged) masked NLL.
void accumulate_gradients(const ForwardTrace& trace, const TaggerParams& params, const ModelConfig& config,
                          std::span<const int> gold, std::span<const std::uint8_t> mask, double weight,
                          GradientSet& grads);

// Gradient of loss(trace.log_probs, gold, mask).
GradientSet backward(const ForwardTrace& trace, const TaggerParams& params, const ModelConfig& config,
                     std::span<const int> gold, std::span<const std::uint8_t> mask);

struct GroupCheck {
  std::string group;
  double max_rel_error = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;
  double max_rel_error() const noexcept;
  bool passed(double tolerance = 1e-4) const noexcept { return max_rel_error() < tolerance; }
};

// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates where both
// gradients vanish from dividing by zero; at or below it the test is
// effectively absolute.
double relative_error(double analytic, double numeric, double floor = 1e-6) noexcept;

// Central differences of the sentence loss against `analytic`, every
// coordinate of every trainable group.
GradCheckReport compare_gradients(const TaggerParams& params, const ModelConfig& config,
                                  std::span<const int> tokens, int year, std::span<const int> gold,
                                  std::span<const std::uint8_t> mask, const GradientSet& analytic,
                                  double step = 1e-5);

struct GradCheckSetup {
  std::size_t vocab_size = 20;
  std::size_t length = 6;
  YearRange years{1810, 1819};
};

// Builds a small random model for `config` (word_dim etc. taken from it),
// a random sentence, runs backward, and compares with finite differences.
GradCheckReport grad_check(const ModelConfig& config, std::uint64_t seed, GradCheckSetup setup = {});

}  // namespace chronotag
