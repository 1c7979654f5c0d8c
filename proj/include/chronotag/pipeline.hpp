#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chronotag/corpus.hpp"
#include "chronotag/embeddings.hpp"
#include "chronotag/model.hpp"
#include "chronotag/training.hpp"

namespace chronotag {

struct DataOptions {
  YearRange years;
  double train_fraction = 0.9;
  std::size_t max_len = 50;
  std::size_t vocab_cap = 600000;
  std::size_t word_dim = 300;
  std::optional<std::filesystem::path> embeddings;
  double oov_stddev = 0.1;
  std::uint64_t seed = 0;
};

// Split, vocabulary, tag set, word table and encodings for one experiment.
struct ExperimentData {
  CorpusSplit split;
  Vocabulary vocab;
  TagSet tags;
  std::shared_ptr<const WordTable> words;
  std::vector<EncodedSentence> train;
  std::vector<EncodedSentence> test;
  std::vector<std::string> warnings;
};

// Truncates to max_len, splits with Rng(seed).fork("split"), builds the
// vocabulary and tag set from the training part, and draws word vectors
// with Rng(seed).fork("embeddings").
ExperimentData prepare_data(std::vector<DatedSentence> corpus, const DataOptions& options);

struct TrainedModel {
  ModelConfig config;
  TaggerParams params;
  TrainReport report;
};

// Parameters come from Rng(train.seed).fork("init").
TrainedModel train_model(const ExperimentData& data, ModelConfig config, YearRange years, const TrainConfig& train,
                         const ProgressFn& progress = {});

}  // namespace chronotag
