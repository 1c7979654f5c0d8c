#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "chronotag/corpus.hpp"
#include "chronotag/errors.hpp"
#include "doctest.h"

using namespace chronotag;

namespace {

DatedSentence sent(int year, std::vector<std::string> tokens, std::vector<std::string> tags) {
  return DatedSentence{year, std::move(tokens), std::move(tags)};
}

std::vector<DatedSentence> decades_corpus(YearRange range, std::size_t per) {
  std::vector<DatedSentence> out;
  for (int y = range.min; y <= range.max; ++y) {
    for (std::size_t i = 0; i < per; ++i) out.push_back(sent(y, {"w" + std::to_string(i)}, {"N"}));
  }
  return out;
}

}  // namespace

TEST_CASE("decade arithmetic") {
  CHECK(decade_of(1817) == 1810);
  CHECK(decade_of(1810) == 1810);
  CHECK(decade_of(2009) == 2000);
  CHECK(decade_of(-3) == -10);
  CHECK(decade_label(1930) == "1930s");
}

TEST_CASE("corpus lines round trip") {
  const std::vector<DatedSentence> s = {sent(1817, {"The", "cat", "\"sat\""}, {"DET", "NOUN", "VERB"}),
                                        sent(2009, {"ok"}, {"X"})};
  std::stringstream buf;
  write_corpus(buf, s);
  std::stringstream in(buf.str() + "\n   \n");
  CHECK(read_corpus(in, {}) == s);
}

TEST_CASE("corpus errors carry line numbers") {
  const YearRange r;
  auto fails_on = [&](const std::string& text, std::size_t line) {
    std::istringstream in(text);
    try {
      read_corpus(in, r);
      FAIL("no error");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
    }
  };
  const std::string good = R"({"year": 1900, "tokens": ["a"], "tags": ["X"]})";
  fails_on(good + "\n{oops\n", 2);
  fails_on(good + "\n\n" + R"({"year": 1700, "tokens": ["a"], "tags": ["X"]})", 3);
  fails_on(R"({"year": 1900, "tokens": ["a", "b"], "tags": ["X"]})", 1);
  fails_on(R"({"year": 1900, "tokens": [], "tags": []})", 1);
  fails_on(R"({"year": "x", "tokens": ["a"], "tags": ["X"]})", 1);
  fails_on("[1, 2]", 1);
}

TEST_CASE("validate") {
  const YearRange r{1900, 1909};
  CHECK_NOTHROW(validate(sent(1905, {"a"}, {"X"}), r));
  CHECK_THROWS_AS(validate(sent(1910, {"a"}, {"X"}), r), DataError);
  CHECK_THROWS_AS(validate(sent(1905, {"a"}, {}), r), DataError);
  CHECK_THROWS_AS(validate(sent(1905, {}, {}), r), DataError);
}

TEST_CASE("balanced sample draws exactly per_decade from each decade") {
  const YearRange r{1900, 1939};
  const auto corpus = decades_corpus(r, 3);  // 30 per decade
  Rng a(5), b(5);
  const auto x = balanced_sample(corpus, 12, r, a);
  const auto y = balanced_sample(corpus, 12, r, b);
  CHECK(x == y);
  REQUIRE(x.size() == 48);
  std::map<int, int> counts;
  std::set<std::pair<int, std::string>> seen;
  for (const auto& s : x) {
    ++counts[decade_of(s.year)];
    CHECK(seen.emplace(s.year, s.tokens[0]).second);  // no replacement
  }
  for (const auto& [d, n] : counts) CHECK(n == 12);
  Rng c(1);
  CHECK_THROWS_AS(balanced_sample(corpus, 31, r, c), DataError);
  // A decade with no sentences at all is reported too.
  Rng e(1);
  CHECK_THROWS_AS(balanced_sample(corpus, 1, YearRange{1900, 1949}, e), DataError);
}

TEST_CASE("truncate") {
  const auto t = truncate({sent(1900, {"a", "b", "c"}, {"X", "Y", "Z"}), sent(1900, {"a"}, {"X"})}, 2);
  CHECK(t[0].tokens == std::vector<std::string>{"a", "b"});
  CHECK(t[0].tags == std::vector<std::string>{"X", "Y"});
  CHECK(t[1].tokens.size() == 1);
  CHECK_THROWS_AS(truncate({}, 0), InvalidArgument);
}

TEST_CASE("split sizes and disjointness") {
  CHECK(split_train_count(10, 0.9) == 9);
  CHECK(split_train_count(15, 0.9) == 14);  // 13.5 rounds up
  CHECK(split_train_count(3, 0.5) == 2);
  std::vector<DatedSentence> s;
  for (int i = 0; i < 101; ++i) s.push_back(sent(1900, {std::to_string(i)}, {"X"}));
  Rng r(3);
  const auto sp = split(s, 0.9, r);
  CHECK(sp.train.size() == 91);
  CHECK(sp.test.size() == 10);
  std::set<std::string> ids;
  for (const auto& x : sp.train) ids.insert(x.tokens[0]);
  for (const auto& x : sp.test) CHECK(ids.insert(x.tokens[0]).second);
  CHECK(ids.size() == 101);
  Rng q(3);
  CHECK_THROWS_AS(split(s, 1.0, q), InvalidArgument);
  CHECK_THROWS_AS(split({s[0]}, 0.5, q), InvalidArgument);
}

TEST_CASE("vocabulary keeps the most frequent words with lexicographic ties") {
  const std::vector<DatedSentence> train = {sent(1900, {"b", "a", "c", "b"}, {"X", "X", "X", "X"}),
                                            sent(1900, {"d", "c", "e"}, {"X", "X", "X"})};
  const auto v = build_vocab(train, 3);
  REQUIRE(v.size() == 5);
  CHECK(v.word(0) == "<pad>");
  CHECK(v.word(1) == "<unk>");
  CHECK(v.word(2) == "b");
  CHECK(v.word(3) == "c");
  CHECK(v.word(4) == "a");
  CHECK(v.id("e") == Vocabulary::kUnk);
  CHECK(v.id("c") == 3);
  CHECK(build_vocab(train, 100).size() == 7);

  const auto dir = std::filesystem::temp_directory_path() / "chronotag_vocab_test";
  std::filesystem::create_directories(dir);
  v.save(dir / "vocab.tsv");
  const auto w = Vocabulary::load(dir / "vocab.tsv");
  CHECK(w.words() == v.words());
  std::filesystem::remove_all(dir);
}

TEST_CASE("tagset and encoding") {
  const std::vector<DatedSentence> train = {sent(1900, {"a", "b"}, {"N", "V"}), sent(1901, {"c"}, {"N"})};
  const auto tags = build_tagset(train);
  CHECK(tags.tags() == std::vector<std::string>{"N", "V"});
  const auto vocab = build_vocab(train, 10);
  const auto e = encode(sent(1905, {"a", "zzz", "c"}, {"V", "ADJ", "N"}), vocab, tags);
  CHECK(e.year == 1905);
  CHECK(e.tokens == std::vector<int>{vocab.id("a"), Vocabulary::kUnk, vocab.id("c")});
  CHECK(e.tags == std::vector<int>{1, TagSet::kUnknown, 0});
  CHECK_THROWS_AS(build_tagset({}), InvalidArgument);

  const auto dir = std::filesystem::temp_directory_path() / "chronotag_tags_test";
  std::filesystem::create_directories(dir);
  tags.save(dir / "tags.tsv");
  CHECK(TagSet::load(dir / "tags.tsv").tags() == tags.tags());
  std::filesystem::remove_all(dir);
}
