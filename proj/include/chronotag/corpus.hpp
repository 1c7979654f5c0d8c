#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chronotag/rng.hpp"

namespace chronotag {

struct YearRange {
  int min = 1810;
  int max = 2009;

  bool contains(int year) const noexcept { return year >= min && year <= max; }
  std::size_t count() const noexcept { return static_cast<std::size_t>(max - min + 1); }
  friend bool operator==(const YearRange&, const YearRange&) = default;
};

struct DatedSentence {
  int year = 0;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  friend bool operator==(const DatedSentence&, const DatedSentence&) = default;
};

// Throws DataError if the sentence is empty, token/tag lengths differ, or the
// year falls outside `range`.
void validate(const DatedSentence& sentence, const YearRange& range);

inline int decade_of(int year) noexcept { return year - ((year % 10) + 10) % 10; }
inline std::string decade_label(int decade) { return std::to_string(decade) + "s"; }

// One JSON object per line: {"year": 1817, "tokens": [...], "tags": [...]}.
// Blank lines are skipped. Errors carry the 1-based line number.
std::vector<DatedSentence> read_corpus(std::istream& in, const YearRange& range);
std::vector<DatedSentence> load_corpus(const std::filesystem::path& path, const YearRange& range);
void write_corpus(std::ostream& out, const std::vector<DatedSentence>& sentences);
void save_corpus(const std::filesystem::path& path, const std::vector<DatedSentence>& sentences);

// Exactly `per_decade` sentences from every decade of `range`, drawn without
// replacement, concatenated and shuffled by `rng`.
std::vector<DatedSentence> balanced_sample(const std::vector<DatedSentence>& corpus, std::size_t per_decade,
                                           const YearRange& range, Rng& rng);

std::vector<DatedSentence> truncate(std::vector<DatedSentence> sentences, std::size_t max_len);

struct CorpusSplit {
  std::vector<DatedSentence> train;
  std::vector<DatedSentence> test;
  double fraction = 0.9;
  std::uint64_t seed = 0;
};

// Shuffle by `rng`, then cut at floor(fraction * n + 0.5).
CorpusSplit split(std::vector<DatedSentence> sentences, double fraction, Rng& rng);
std::size_t split_train_count(std::size_t n, double fraction);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  // Most frequent `max_size` words of `train`; ties broken lexicographically.
  static Vocabulary build(const std::vector<DatedSentence>& train, std::size_t max_size);

  int id(std::string_view word) const;  // kUnk when absent
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view word) const;
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  void add(std::string word);
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

inline Vocabulary build_vocab(const std::vector<DatedSentence>& train, std::size_t max_size) {
  return Vocabulary::build(train, max_size);
}

class TagSet {
 public:
  static constexpr int kUnknown = -1;

  // One id per distinct tag in first-occurrence order. Throws on empty input.
  static TagSet build(const std::vector<DatedSentence>& train);

  int id(std::string_view tag) const;  // kUnknown when unseen
  const std::string& tag(int id) const { return tags_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return tags_.size(); }
  const std::vector<std::string>& tags() const noexcept { return tags_; }

  void save(const std::filesystem::path& path) const;
  static TagSet load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> ids_;
};

inline TagSet build_tagset(const std::vector<DatedSentence>& train) { return TagSet::build(train); }

struct EncodedSentence {
  int year = 0;
  std::vector<int> tokens;
  std::vector<int> tags;  // TagSet::kUnknown for tags unseen in training
};

EncodedSentence encode(const DatedSentence& sentence, const Vocabulary& vocab, const TagSet& tags);
std::vector<EncodedSentence> encode_all(const std::vector<DatedSentence>& sentences, const Vocabulary& vocab,
                                        const TagSet& tags);

}  // namespace chronotag
