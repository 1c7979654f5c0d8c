#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chronotag/corpus.hpp"
#include "chronotag/rng.hpp"

namespace chronotag {

enum class DriftMode { none, lexical, syntactic, mixed };

std::string_view to_string(DriftMode mode) noexcept;
DriftMode parse_drift_mode(std::string_view name);

// Word counts per pool. The three ambiguous pools carry two tags each.
struct VocabSpec {
  std::size_t nouns = 140;
  std::size_t verbs = 100;
  std::size_t adjectives = 70;
  std::size_t adverbs = 35;
  std::size_t noun_adj = 30;   // ADJ/NOUN pair slots
  std::size_t verb_adv = 20;   // VERB/ADV pair slots
  std::size_t noun_verb = 40;  // VERB/NOUN pair slots and plain noun/verb slots

  std::size_t total() const noexcept;
};

struct SynthConfig {
  YearRange years;
  std::size_t per_decade = 500;
  VocabSpec vocab;
  DriftMode mode = DriftMode::syntactic;
  double slope = 40.0;      // logistic scale of the order drift, in years
  double midpoint = 1910.0;
  double lexical_strength = 0.6;  // ambiguous share spans 0.5 +- strength / 2
  std::size_t min_len = 5;
  std::size_t max_len = 20;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

// The closed-class and pseudo-word lexicon for `spec`. Independent of the
// generation seed, so corpora from different seeds share a vocabulary.
struct Lexicon {
  std::vector<std::string> det, pron, aux, prep, conj, punct;
  std::vector<std::string> noun, verb, adj, adv;
  std::vector<std::string> noun_adj, verb_adv, noun_verb;
};

Lexicon make_lexicon(const VocabSpec& spec);

inline constexpr std::size_t kOrderParameters = 3;

// A swappable pair of adjacent slots; order A is (first, second), B swaps.
struct OrderParameter {
  std::string_view name;
  std::string_view first_tag;
  std::string_view second_tag;
};

const OrderParameter& order_parameter(std::size_t k);

// P(order B) for a sentence of `year`: logistic((year - midpoint) / slope)
// in syntactic and mixed modes, 0 otherwise.
double order_probability(const SynthConfig& config, int year);

// Share of ambiguous-pool words in slot `first ? first : second` of
// parameter k. Linear in year under lexical and mixed drift, 0.5 otherwise.
double ambiguous_share(const SynthConfig& config, std::size_t k, bool first, int year);

struct OrderEvent {
  std::uint8_t parameter = 0;
  bool swapped = false;
};

struct AnnotatedSentence {
  DatedSentence sentence;
  std::vector<OrderEvent> orders;
};

// Decades in ascending order, per_decade sentences each, years uniform
// within the decade.
std::vector<AnnotatedSentence> generate_annotated(const SynthConfig& config);
std::vector<DatedSentence> generate(const SynthConfig& config);

struct FrequencyReport {
  bool passed = true;
  double threshold = 0.02;
  double max_distance = 0.0;  // largest pairwise total-variation distance
  int decade_a = 0;
  int decade_b = 0;
  std::size_t decades = 0;
};

// Pairwise total-variation distance between per-decade (word, tag) unigram
// distributions.
FrequencyReport verify_frequency_invariance(const std::vector<DatedSentence>& corpus, double threshold = 0.02);

// Permutes the (token, tag) pairs of every sentence.
std::vector<DatedSentence> shuffle_tokens(std::vector<DatedSentence> sentences, Rng& rng);

nlohmann::ordered_json synth_manifest(const SynthConfig& config, std::size_t sentences);

}  // namespace chronotag
