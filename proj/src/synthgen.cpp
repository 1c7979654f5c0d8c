#include "chronotag/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "chronotag/errors.hpp"
#include "chronotag/parallel.hpp"

namespace chronotag {

std::string_view to_string(DriftMode mode) noexcept {
  switch (mode) {
    case DriftMode::none: return "none";
    case DriftMode::lexical: return "lexical";
    case DriftMode::syntactic: return "syntactic";
    case DriftMode::mixed: return "mixed";
  }
  return "none";
}

DriftMode parse_drift_mode(std::string_view name) {
  if (name == "none") return DriftMode::none;
  if (name == "lexical") return DriftMode::lexical;
  if (name == "syntactic") return DriftMode::syntactic;
  if (name == "mixed") return DriftMode::mixed;
  throw InvalidArgument("unknown drift mode '" + std::string(name) + "' (expected none, lexical, syntactic, mixed)");
}

std::size_t VocabSpec::total() const noexcept {
  return nouns + verbs + adjectives + adverbs + noun_adj + verb_adv + noun_verb;
}

void SynthConfig::validate() const {
  if (years.max < years.min) throw InvalidArgument("synth: empty year range");
  if (per_decade < 1) throw InvalidArgument("synth: per_decade must be >= 1");
  if (!std::isfinite(slope) || slope < 0.0) throw InvalidArgument("synth: slope must be finite and >= 0");
  if (!std::isfinite(midpoint)) throw InvalidArgument("synth: midpoint must be finite");
  if (!std::isfinite(lexical_strength) || lexical_strength < 0.0 || lexical_strength > 1.0)
    throw InvalidArgument("synth: lexical_strength must lie in [0, 1]");
  if (min_len < 5 || max_len < min_len) throw InvalidArgument("synth: need 5 <= min_len <= max_len");
  const VocabSpec& v = vocab;
  for (std::size_t n : {v.nouns, v.verbs, v.adjectives, v.adverbs, v.noun_adj, v.verb_adv, v.noun_verb})
    if (n == 0) throw InvalidArgument("synth: every word pool must be nonempty");
}

// ---------------------------------------------------------------------------

Lexicon make_lexicon(const VocabSpec& spec) {
  Lexicon lx;
  lx.det = {"the", "a", "this", "that", "every", "some", "no", "each"};
  lx.pron = {"he", "she", "it", "they", "we", "you", "i", "one"};
  lx.aux = {"will", "would", "can", "could", "must", "shall"};
  lx.prep = {"of", "in", "on", "at", "by", "with", "from", "to", "for", "over", "under", "near"};
  lx.conj = {"and", "but", "or", "yet"};
  lx.punct = {".", "!", "?"};

  std::set<std::string> used;
  for (const auto* pool : {&lx.det, &lx.pron, &lx.aux, &lx.prep, &lx.conj, &lx.punct})
    used.insert(pool->begin(), pool->end());

  static constexpr std::string_view onsets = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  static constexpr std::string_view codas = "lnrsx";
  Rng rng(0x1e71c0ULL);
  auto fresh = [&] {
    for (;;) {
      std::string w;
      const auto syllables = 2 + rng.below(2);
      for (std::uint64_t s = 0; s < syllables; ++s) {
        w += onsets[rng.below(onsets.size())];
        w += vowels[rng.below(vowels.size())];
      }
      if (rng.below(3) == 0) w += codas[rng.below(codas.size())];
      if (used.insert(w).second) return w;
    }
  };
  auto fill = [&](std::vector<std::string>& pool, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) pool.push_back(fresh());
  };
  fill(lx.noun, spec.nouns);
  fill(lx.verb, spec.verbs);
  fill(lx.adj, spec.adjectives);
  fill(lx.adv, spec.adverbs);
  fill(lx.noun_adj, spec.noun_adj);
  fill(lx.verb_adv, spec.verb_adv);
  fill(lx.noun_verb, spec.noun_verb);
  return lx;
}

namespace {

constexpr std::array<OrderParameter, kOrderParameters> kParameters = {{
    {"adjective_position", "ADJ", "NOUN"},
    {"adverb_position", "VERB", "ADV"},
    {"object_position", "VERB", "NOUN"},
}};

// Probability that a plain noun or verb slot draws from the noun/verb pool.
constexpr double kNounVerbRate = 0.5;

}  // namespace

const OrderParameter& order_parameter(std::size_t k) {
  if (k >= kParameters.size()) throw InvalidArgument("order_parameter: index out of range");
  return kParameters[k];
}

double order_probability(const SynthConfig& config, int year) {
  if (config.mode != DriftMode::syntactic && config.mode != DriftMode::mixed) return 0.0;
  const double d = static_cast<double>(year) - config.midpoint;
  if (config.slope == 0.0) return d > 0.0 ? 1.0 : (d < 0.0 ? 0.0 : 0.5);
  return 1.0 / (1.0 + std::exp(-d / config.slope));
}

double ambiguous_share(const SynthConfig& config, std::size_t k, bool first, int year) {
  if (k >= kOrderParameters) throw InvalidArgument("ambiguous_share: index out of range");
  if (config.mode != DriftMode::lexical && config.mode != DriftMode::mixed) return 0.5;
  const double span = std::max(1, config.years.max - config.years.min);
  const double t = static_cast<double>(year - config.years.min) / span - 0.5;
  // Order B grows more likely with year while the ambiguous share of the
  // slot it displaces shrinks, so the two drifts agree.
  const double sign = first ? -1.0 : 1.0;
  return 0.5 + sign * config.lexical_strength * t;
}

namespace {

// Grammatical slot of a token. Words only ever move between slots of the
// same kind, which keeps every slot's word distribution intact.
enum SlotKind : std::uint8_t { kDet, kPron, kAux, kPrep, kConj, kPunct, kNoun, kVerb, kPairSlots };
constexpr std::size_t kSlotKinds = kPairSlots + 2 * kOrderParameters;

struct Token {
  std::string word;
  std::string_view tag;
  std::uint8_t kind;
};

// A sentence under construction. Pairs remember where they sit so the order
// stream can swap them after all content draws are made.
struct Draft {
  std::vector<Token> tokens;
  struct Pair {
    std::size_t at;
    std::uint8_t parameter;
  };
  std::vector<Pair> pairs;
};

class Builder {
 public:
  Builder(const Lexicon& lx, const SynthConfig& config, int year, Rng& content)
      : lx_(lx), config_(config), year_(year), rng_(content) {}

  Draft sentence() {
    Draft d;
    clause(d, true);
    if (rng_.uniform() < 0.35) {
      push(d, pick(lx_.conj), "CONJ", kConj);
      clause(d, false);
    }
    push(d, pick(lx_.punct), "PUNCT", kPunct);
    return d;
  }

 private:
  const std::string& pick(const std::vector<std::string>& pool) { return pool[rng_.below(pool.size())]; }

  void push(Draft& d, const std::string& w, std::string_view tag, std::uint8_t kind) {
    d.tokens.push_back({w, tag, kind});
  }

  // Plain slots: mostly the pure pool, sometimes a noun/verb word that the
  // left context disambiguates.
  void noun(Draft& d) {
    push(d, rng_.uniform() < kNounVerbRate ? pick(lx_.noun_verb) : pick(lx_.noun), "NOUN", kNoun);
  }
  void verb(Draft& d) {
    push(d, rng_.uniform() < kNounVerbRate ? pick(lx_.noun_verb) : pick(lx_.verb), "VERB", kVerb);
  }

  void pair(Draft& d, std::uint8_t k, const std::vector<std::string>& ambiguous, const std::vector<std::string>& first,
            const std::vector<std::string>& second) {
    const auto& p = kParameters[k];
    d.pairs.push_back({d.tokens.size(), k});
    const bool amb1 = rng_.uniform() < ambiguous_share(config_, k, true, year_);
    push(d, amb1 ? pick(ambiguous) : pick(first), p.first_tag, static_cast<std::uint8_t>(kPairSlots + 2 * k));
    const bool amb2 = rng_.uniform() < ambiguous_share(config_, k, false, year_);
    push(d, amb2 ? pick(ambiguous) : pick(second), p.second_tag,
         static_cast<std::uint8_t>(kPairSlots + 2 * k + 1));
  }

  void noun_phrase(Draft& d) {
    push(d, pick(lx_.det), "DET", kDet);
    if (rng_.uniform() < 0.5) {
      pair(d, 0, lx_.noun_adj, lx_.adj, lx_.noun);
    } else {
      noun(d);
    }
  }

  void clause(Draft& d, bool main) {
    if (rng_.uniform() < 0.4) {
      push(d, pick(lx_.pron), "PRON", kPron);
    } else {
      noun_phrase(d);
    }
    if (rng_.uniform() < 0.35) {
      push(d, pick(lx_.aux), "AUX", kAux);
      pair(d, 2, lx_.noun_verb, lx_.verb, lx_.noun);
    } else {
      if (rng_.uniform() < 0.5) {
        pair(d, 1, lx_.verb_adv, lx_.verb, lx_.adv);
      } else {
        verb(d);
      }
      if (rng_.uniform() < 0.6) noun_phrase(d);
    }
    if (main && rng_.uniform() < 0.6) {
      push(d, pick(lx_.prep), "PREP", kPrep);
      noun_phrase(d);
    }
  }

  const Lexicon& lx_;
  const SynthConfig& config_;
  int year_;
  Rng& rng_;
};

struct DecadeSpan {
  int start;
  int lo;
  int hi;
};

std::vector<DecadeSpan> decades_of(YearRange r) {
  std::vector<DecadeSpan> out;
  for (int d = decade_of(r.min); d <= r.max; d += 10) out.push_back({d, std::max(d, r.min), std::min(d + 9, r.max)});
  return out;
}

}  // namespace

std::vector<AnnotatedSentence> generate_annotated(const SynthConfig& config) {
  config.validate();
  const Lexicon lx = make_lexicon(config.vocab);
  const auto decades = decades_of(config.years);
  const Rng root(config.seed);
  const Rng content_root = root.fork("content");
  const Rng order_root = root.fork("order");

  // Without lexical drift the content of sentence i is drawn from a stream
  // keyed by i alone, so every decade holds the same multiset of (word, tag)
  // pairs. Words are then dealt back out within slot kinds by a per-decade
  // permutation so sentences themselves do not repeat across decades.
  const bool invariant = config.mode == DriftMode::none || config.mode == DriftMode::syntactic;
  const Rng deal_root = root.fork("deal");

  std::vector<std::vector<AnnotatedSentence>> parts(decades.size());
  parallel_chunks(decades.size(), config.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t di = begin; di < end; ++di) {
      const DecadeSpan dec = decades[di];
      const auto key = static_cast<std::uint64_t>(dec.start);
      const Rng order_dec = order_root.fork(key);
      const Rng content_dec = invariant ? content_root : content_root.fork(key);
      std::vector<Draft> drafts(config.per_decade);
      std::vector<int> years(config.per_decade);
      for (std::size_t i = 0; i < config.per_decade; ++i) {
        Rng order = order_dec.fork(i);
        years[i] = dec.lo + static_cast<int>(order.below(static_cast<std::uint64_t>(dec.hi - dec.lo + 1)));
        Rng content = content_dec.fork(i);
        do {
          drafts[i] = Builder(lx, config, years[i], content).sentence();
        } while (drafts[i].tokens.size() < config.min_len || drafts[i].tokens.size() > config.max_len);
      }

      if (invariant) {
        Rng deal = deal_root.fork(key);
        for (std::size_t kind = 0; kind < kSlotKinds; ++kind) {
          std::vector<std::string*> slots;
          for (auto& d : drafts)
            for (auto& t : d.tokens)
              if (t.kind == kind) slots.push_back(&t.word);
          std::vector<std::string> words;
          words.reserve(slots.size());
          for (auto* w : slots) words.push_back(*w);
          deal.shuffle(std::span<std::string>(words));
          for (std::size_t j = 0; j < slots.size(); ++j) *slots[j] = std::move(words[j]);
        }
      }

      auto& out = parts[di];
      out.reserve(config.per_decade);
      for (std::size_t i = 0; i < config.per_decade; ++i) {
        Rng order = order_dec.fork(i);
        order.below(static_cast<std::uint64_t>(dec.hi - dec.lo + 1));  // the year draw
        Draft& draft = drafts[i];
        AnnotatedSentence a;
        const double p = order_probability(config, years[i]);
        for (const auto& pr : draft.pairs) {
          const bool swap = order.uniform() < p;
          if (swap) std::swap(draft.tokens[pr.at], draft.tokens[pr.at + 1]);
          a.orders.push_back({pr.parameter, swap});
        }
        a.sentence.year = years[i];
        for (auto& t : draft.tokens) {
          a.sentence.tokens.push_back(std::move(t.word));
          a.sentence.tags.emplace_back(t.tag);
        }
        out.push_back(std::move(a));
      }
    }
  });

  std::vector<AnnotatedSentence> all;
  all.reserve(decades.size() * config.per_decade);
  for (auto& p : parts)
    for (auto& s : p) all.push_back(std::move(s));
  return all;
}

std::vector<DatedSentence> generate(const SynthConfig& config) {
  auto annotated = generate_annotated(config);
  std::vector<DatedSentence> out;
  out.reserve(annotated.size());
  for (auto& a : annotated) out.push_back(std::move(a.sentence));
  return out;
}

FrequencyReport verify_frequency_invariance(const std::vector<DatedSentence>& corpus, double threshold) {
  std::map<int, std::unordered_map<std::string, double>> hist;
  std::map<int, double> totals;
  for (const auto& s : corpus) {
    auto& h = hist[decade_of(s.year)];
    for (std::size_t i = 0; i < s.tokens.size(); ++i) h[s.tokens[i] + '\t' + s.tags[i]] += 1.0;
    totals[decade_of(s.year)] += static_cast<double>(s.tokens.size());
  }
  FrequencyReport r;
  r.threshold = threshold;
  r.decades = hist.size();
  for (auto a = hist.begin(); a != hist.end(); ++a) {
    for (auto b = std::next(a); b != hist.end(); ++b) {
      const double na = totals[a->first], nb = totals[b->first];
      double tv = 0.0;
      for (const auto& [key, c] : a->second) {
        const auto it = b->second.find(key);
        tv += std::abs(c / na - (it == b->second.end() ? 0.0 : it->second / nb));
      }
      for (const auto& [key, c] : b->second)
        if (!a->second.count(key)) tv += c / nb;
      tv *= 0.5;
      if (tv > r.max_distance) {
        r.max_distance = tv;
        r.decade_a = a->first;
        r.decade_b = b->first;
      }
    }
  }
  r.passed = r.max_distance < threshold;
  return r;
}

std::vector<DatedSentence> shuffle_tokens(std::vector<DatedSentence> sentences, Rng& rng) {
  std::vector<std::size_t> perm;
  for (auto& s : sentences) {
    perm.resize(s.tokens.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    DatedSentence t;
    t.year = s.year;
    for (std::size_t i : perm) {
      t.tokens.push_back(std::move(s.tokens[i]));
      t.tags.push_back(std::move(s.tags[i]));
    }
    s = std::move(t);
  }
  return sentences;
}

nlohmann::ordered_json synth_manifest(const SynthConfig& c, std::size_t sentences) {
  nlohmann::ordered_json j;
  j["generator"] = "chronotag synth";
  j["seed"] = c.seed;
  j["mode"] = std::string(to_string(c.mode));
  j["year_min"] = c.years.min;
  j["year_max"] = c.years.max;
  j["per_decade"] = c.per_decade;
  j["slope"] = c.slope;
  j["midpoint"] = c.midpoint;
  j["lexical_strength"] = c.lexical_strength;
  j["min_len"] = c.min_len;
  j["max_len"] = c.max_len;
  j["vocab"] = {{"nouns", c.vocab.nouns},         {"verbs", c.vocab.verbs},       {"adjectives", c.vocab.adjectives},
                {"adverbs", c.vocab.adverbs},     {"noun_adj", c.vocab.noun_adj}, {"verb_adv", c.vocab.verb_adv},
                {"noun_verb", c.vocab.noun_verb}};
  j["sentences"] = sentences;
  return j;
}

}  // namespace chronotag
