#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chronotag/corpus.hpp"
#include "chronotag/matrix.hpp"
#include "chronotag/rng.hpp"

namespace chronotag {

// Static word vectors, one row per vocabulary id. Never updated by training.
struct WordTable {
  Matrix vectors;

  std::size_t dim() const noexcept { return vectors.cols(); }
  std::span<const double> row(int id) const { return vectors.row(static_cast<std::size_t>(id)); }
};

struct WordTableOptions {
  double oov_stddev = 0.1;
};

// Words found in a textual word2vec stream get their file vectors; every other
// vocabulary word gets N(0, oov_stddev^2) draws from a generator seeded by
// (rng seed, FNV-1a(word)), so a word's vector does not depend on vocabulary
// order. The PAD row is zero. Messages about duplicate words are appended to
// `warnings` when given.
WordTable read_word_table(std::istream* in, const Vocabulary& vocab, std::size_t dim, const Rng& rng,
                          WordTableOptions options = {}, std::vector<std::string>* warnings = nullptr);
WordTable load_word_table(const std::optional<std::filesystem::path>& path, const Vocabulary& vocab,
                          std::size_t dim, const Rng& rng, WordTableOptions options = {},
                          std::vector<std::string>* warnings = nullptr);

// Trainable year vectors, row (year - range.min).
struct YearTable {
  YearRange range;
  Matrix vectors;

  std::size_t dim() const noexcept { return vectors.cols(); }
  std::size_t row_of(int year) const;  // throws InvalidArgument outside range
  std::span<const double> row(int year) const { return vectors.row(row_of(year)); }
};

YearTable init_year_table(int year_min, int year_max, std::size_t dim, Rng& rng);

}  // namespace chronotag
