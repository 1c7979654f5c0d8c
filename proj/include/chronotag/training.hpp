#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chronotag/corpus.hpp"
#include "chronotag/model.hpp"
#include "chronotag/rng.hpp"

namespace chronotag {

enum class Optimizer { adam, sgd };

struct TrainConfig {
  std::size_t batch_size = 100;
  double learning_rate = 0.001;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  bool shuffle = true;
  Optimizer optimizer = Optimizer::adam;
  double clip_norm = 0.0;  // global-norm clipping; 0 disables
  std::size_t threads = 1;
  std::size_t log_every = 10;  // batches per progress point

  void validate() const;
};

// Sentences padded to `max_len`; row i occupies [i * max_len, (i + 1) * max_len).
struct Batch {
  std::size_t max_len = 0;
  std::vector<int> tokens;  // Vocabulary::kPad in padding
  std::vector<int> tags;    // TagSet::kUnknown in padding
  std::vector<std::uint8_t> mask;
  std::vector<int> years;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> source;  // index of each row in the input dataset

  std::size_t size() const noexcept { return years.size(); }
  std::size_t length(std::size_t row) const noexcept { return lengths[row]; }
  std::span<const int> row_tokens(std::size_t row) const noexcept {
    return {tokens.data() + row * max_len, length(row)};
  }
  std::span<const int> row_tags(std::size_t row) const noexcept { return {tags.data() + row * max_len, length(row)}; }
  std::span<const std::uint8_t> row_mask(std::size_t row) const noexcept {
    return {mask.data() + row * max_len, length(row)};
  }
};

// Order is shuffled by `rng` when given; the final short batch is kept.
std::vector<Batch> make_batches(const std::vector<EncodedSentence>& sentences, std::size_t max_len,
                                std::size_t batch_size, Rng* rng);

struct LossPoint {
  std::size_t step = 0;
  double mean_loss = 0.0;
};

struct TrainReport {
  std::vector<LossPoint> losses;
  double initial_train_accuracy = 0.0;
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  std::size_t steps = 0;
  std::size_t sentences_seen = 0;
  double wall_seconds = 0.0;
};

using ProgressFn = std::function<void(const LossPoint&)>;

// Mini-batch training: forward, masked NLL, backward, optimizer step per
// batch. Throws NumericalFailure naming the batch and sentence on a
// non-finite loss.
TrainReport train(TaggerParams& params, const ModelConfig& config, const std::vector<EncodedSentence>& train_set,
                  const std::vector<EncodedSentence>& test_set, const TrainConfig& train_config,
                  const ProgressFn& progress = {});

// Mean masked NLL over `batch` (the training objective of one step).
double batch_loss(const TaggerParams& params, const ModelConfig& config, const Batch& batch);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values) noexcept;

// Fraction of tokens whose argmax tag equals the gold tag. Gold tags unseen
// in training (TagSet::kUnknown) count as misses.
double evaluate_accuracy(const TaggerParams& params, const ModelConfig& config,
                         const std::vector<EncodedSentence>& sentences, std::size_t threads = 1);

// Versioned binary checkpoint: "CHRTAGCK", u32 version, u64 header length,
// JSON header (config + year range + shapes), then every matrix as u64 rows,
// u64 cols, rows*cols little-endian float64. Matrix order: word_table,
// year_table, hidden_weights, hidden_bias, output_weights, output_bias.
struct Checkpoint {
  ModelConfig config;
  TaggerParams params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const TaggerParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace chronotag
