#include <cmath>
#include <map>
#include <set>

#include "chronotag/errors.hpp"
#include "chronotag/synthgen.hpp"
#include "doctest.h"

using namespace chronotag;

namespace {

SynthConfig small(DriftMode mode, std::uint64_t seed = 1) {
  SynthConfig c;
  c.years = {1810, 1909};
  c.per_decade = 200;
  c.mode = mode;
  c.midpoint = 1860.0;
  c.slope = 15.0;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("drift mode names") {
  for (auto m : {DriftMode::none, DriftMode::lexical, DriftMode::syntactic, DriftMode::mixed}) {
    CHECK(parse_drift_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_drift_mode("chaotic"), InvalidArgument);
}

TEST_CASE("generation is deterministic and thread-independent") {
  auto c = small(DriftMode::mixed, 4);
  const auto a = generate(c);
  c.threads = 3;
  CHECK(generate(c) == a);
  c.seed = 5;
  CHECK_FALSE(generate(c) == a);
}

TEST_CASE("decade layout and sentence shape") {
  const auto c = small(DriftMode::syntactic);
  const auto s = generate(c);
  REQUIRE(s.size() == 10 * c.per_decade);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(decade_of(s[i].year) == 1810 + 10 * static_cast<int>(i / c.per_decade));
    CHECK(s[i].tokens.size() >= c.min_len);
    CHECK(s[i].tokens.size() <= c.max_len);
    CHECK(s[i].tokens.size() == s[i].tags.size());
    CHECK(s[i].tags.back() == "PUNCT");
  }
}

TEST_CASE("syntactic drift leaves decade unigrams identical") {
  const auto r = verify_frequency_invariance(generate(small(DriftMode::syntactic)));
  CHECK(r.passed);
  CHECK(r.max_distance == 0.0);
  CHECK(r.decades == 10);
  const auto none = verify_frequency_invariance(generate(small(DriftMode::none)));
  CHECK(none.max_distance == 0.0);
}

TEST_CASE("lexical drift is caught by the frequency check") {
  auto c = small(DriftMode::lexical);
  c.lexical_strength = 1.0;
  const auto r = verify_frequency_invariance(generate(c));
  CHECK_FALSE(r.passed);
  CHECK(r.max_distance > 0.02);
  CHECK(r.decade_a != r.decade_b);
}

TEST_CASE("a single decade passes trivially") {
  auto c = small(DriftMode::mixed);
  c.years = {1900, 1909};
  const auto r = verify_frequency_invariance(generate(c));
  CHECK(r.passed);
  CHECK(r.decades == 1);
  CHECK(r.max_distance == 0.0);
}

TEST_CASE("swap frequencies follow the logistic order probability") {
  const auto c = small(DriftMode::syntactic, 2);
  const auto a = generate_annotated(c);
  std::map<int, std::pair<double, double>> hits;  // decade -> (swaps, events)
  std::map<int, double> expect;
  for (const auto& s : a) {
    const int d = decade_of(s.sentence.year);
    for (const auto& e : s.orders) {
      hits[d].first += e.swapped ? 1.0 : 0.0;
      hits[d].second += 1.0;
      expect[d] += order_probability(c, s.sentence.year);
    }
  }
  REQUIRE(hits.size() == 10);
  double prev = -1.0;
  for (const auto& [d, h] : hits) {
    const double p = expect[d] / h.second;
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-4) / h.second);
    CHECK(std::abs(h.first / h.second - p) <= 3.0 * se);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("a zero slope gives pure orders on each side of the midpoint") {
  auto c = small(DriftMode::syntactic);
  c.slope = 0.0;
  c.midpoint = 1859.5;
  for (const auto& s : generate_annotated(c)) {
    for (const auto& e : s.orders) CHECK(e.swapped == (s.sentence.year > 1859));
  }
  CHECK(order_probability(c, 1859) == 0.0);
  CHECK(order_probability(c, 1860) == 1.0);
}

TEST_CASE("without drift nothing depends on the year") {
  const auto c = small(DriftMode::none);
  for (int y : {1810, 1860, 1909}) {
    CHECK(order_probability(c, y) == 0.0);
    for (std::size_t k = 0; k < kOrderParameters; ++k) CHECK(ambiguous_share(c, k, true, y) == 0.5);
  }
  for (const auto& s : generate_annotated(c)) {
    for (const auto& e : s.orders) CHECK_FALSE(e.swapped);
  }
}

TEST_CASE("ambiguous share moves in opposite directions for the two slots") {
  auto c = small(DriftMode::lexical);
  c.lexical_strength = 0.6;
  CHECK(ambiguous_share(c, 0, true, 1810) == doctest::Approx(0.8));
  CHECK(ambiguous_share(c, 0, true, 1909) == doctest::Approx(0.2));
  CHECK(ambiguous_share(c, 1, false, 1810) == doctest::Approx(0.2));
  CHECK(ambiguous_share(c, 2, false, 1909) == doctest::Approx(0.8));
  CHECK_THROWS_AS(ambiguous_share(c, 3, true, 1900), InvalidArgument);
  CHECK_THROWS_AS(order_parameter(3), InvalidArgument);
}

TEST_CASE("lexicon sizes and disjoint pools") {
  const VocabSpec spec;
  const auto lex = make_lexicon(spec);
  CHECK(lex.noun.size() == spec.nouns);
  CHECK(lex.noun_verb.size() == spec.noun_verb);
  std::set<std::string> all;
  std::size_t n = 0;
  for (const auto* pool : {&lex.det, &lex.pron, &lex.aux, &lex.prep, &lex.conj, &lex.punct, &lex.noun, &lex.verb,
                           &lex.adj, &lex.adv, &lex.noun_adj, &lex.verb_adv, &lex.noun_verb}) {
    for (const auto& w : *pool) all.insert(w);
    n += pool->size();
  }
  CHECK(all.size() == n);
  CHECK(make_lexicon(spec).noun == lex.noun);
}

TEST_CASE("token shuffle keeps word-tag pairs") {
  const auto s = generate(small(DriftMode::syntactic));
  Rng r(3);
  const auto t = shuffle_tokens(s, r);
  REQUIRE(t.size() == s.size());
  std::size_t moved = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(t[i].year == s[i].year);
    std::multiset<std::pair<std::string, std::string>> a, b;
    for (std::size_t j = 0; j < s[i].tokens.size(); ++j) a.emplace(s[i].tokens[j], s[i].tags[j]);
    for (std::size_t j = 0; j < t[i].tokens.size(); ++j) b.emplace(t[i].tokens[j], t[i].tags[j]);
    CHECK(a == b);
    moved += t[i].tokens != s[i].tokens;
  }
  CHECK(moved > s.size() / 2);
}

TEST_CASE("invalid configurations") {
  auto bad = [](auto edit) {
    auto c = small(DriftMode::mixed);
    edit(c);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    CHECK_THROWS_AS(generate(c), InvalidArgument);
  };
  bad([](SynthConfig& c) { c.per_decade = 0; });
  bad([](SynthConfig& c) { c.slope = -1.0; });
  bad([](SynthConfig& c) { c.lexical_strength = 1.5; });
  bad([](SynthConfig& c) { c.min_len = 4; });
  bad([](SynthConfig& c) { c.max_len = 4; });
  bad([](SynthConfig& c) { c.years = {1900, 1800}; });
  bad([](SynthConfig& c) { c.vocab.adverbs = 0; });
}

TEST_CASE("manifest records the configuration") {
  const auto c = small(DriftMode::lexical);
  const auto j = synth_manifest(c, 2000);
  CHECK(j["mode"] == "lexical");
  CHECK(j["slope"] == 15.0);
}
