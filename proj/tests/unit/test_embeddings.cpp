#include <cmath>
#include <sstream>

#include "chronotag/embeddings.hpp"
#include "chronotag/errors.hpp"
#include "doctest.h"

using namespace chronotag;

namespace {

Vocabulary vocab_of(std::vector<std::string> words) {
  return build_vocab({DatedSentence{1900, words, std::vector<std::string>(words.size(), "X")}}, 1000);
}

}  // namespace

TEST_CASE("file vectors are used and the count header is skipped") {
  const auto v = vocab_of({"cat", "dog", "emu"});
  std::istringstream in("2 3\ncat 1 2 3\nzebra 9 9 9\n\ndog -1 0.5 1e-3\n");
  const auto t = read_word_table(&in, v, 3, Rng(1));
  CHECK(t.vectors.rows() == v.size());
  CHECK(t.dim() == 3);
  CHECK(t.row(v.id("cat"))[1] == 2.0);
  CHECK(t.row(v.id("dog"))[2] == 1e-3);
  for (double x : t.row(Vocabulary::kPad)) CHECK(x == 0.0);
  CHECK(t.row(v.id("emu"))[0] != 0.0);
}

TEST_CASE("out-of-vocabulary vectors depend on the word, not its id") {
  const auto a = vocab_of({"alpha", "beta", "gamma"});
  const auto b = vocab_of({"gamma", "gamma", "gamma", "beta", "beta", "alpha"});
  REQUIRE(a.id("alpha") != b.id("alpha"));
  const auto ta = read_word_table(nullptr, a, 5, Rng(7));
  const auto tb = read_word_table(nullptr, b, 5, Rng(7));
  for (const char* w : {"alpha", "beta", "gamma", "<unk>"}) {
    const auto ra = ta.row(a.id(w));
    const auto rb = tb.row(b.id(w));
    CHECK(std::equal(ra.begin(), ra.end(), rb.begin()));
  }
  const auto tc = read_word_table(nullptr, a, 5, Rng(8));
  CHECK(tc.row(a.id("alpha"))[0] != ta.row(a.id("alpha"))[0]);
}

TEST_CASE("out-of-vocabulary draws have the requested spread") {
  const auto v = vocab_of({"x"});
  const auto t = read_word_table(nullptr, v, 20000, Rng(3), WordTableOptions{0.25});
  double s = 0.0, ss = 0.0;
  for (double x : t.row(v.id("x"))) {
    s += x;
    ss += x * x;
  }
  const double n = 20000.0;
  const double mean = s / n;
  CHECK(std::abs(mean) < 4.0 * 0.25 / std::sqrt(n));
  CHECK(std::sqrt(ss / n - mean * mean) == doctest::Approx(0.25).epsilon(0.03));
}

TEST_CASE("malformed embedding files") {
  const auto v = vocab_of({"cat"});
  std::vector<std::string> warnings;
  {
    std::istringstream in("cat 1 2\ncat 3 4\n");
    const auto t = read_word_table(&in, v, 2, Rng(1), {}, &warnings);
    CHECK(t.row(v.id("cat"))[0] == 3.0);
    CHECK(warnings.size() == 1);
  }
  auto fails_on = [&](const std::string& text, std::size_t line) {
    std::istringstream in(text);
    try {
      read_word_table(&in, v, 2, Rng(1));
      FAIL("no error");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
    }
  };
  fails_on("cat 1 2 3\n", 1);
  fails_on("dog 1 2\ncat 1 x\n", 2);
  // A wrong-width line is an error even for words outside the vocabulary.
  fails_on("dog 1\n", 1);
  CHECK_THROWS_AS(read_word_table(nullptr, v, 0, Rng(1)), InvalidArgument);
  CHECK_THROWS_AS(load_word_table(std::filesystem::path("/nonexistent/vec.txt"), v, 2, Rng(1)), DataError);
}

TEST_CASE("year table rows") {
  Rng r(1);
  const auto t = init_year_table(1810, 2009, 4, r);
  CHECK(t.vectors.rows() == 200);
  CHECK(t.row_of(1810) == 0);
  CHECK(t.row_of(2009) == 199);
  CHECK_THROWS_AS(t.row_of(1809), InvalidArgument);
  CHECK_THROWS_AS(t.row(2010), InvalidArgument);
  const double bound = std::sqrt(6.0 / (200.0 + 4.0));
  for (double x : t.vectors.data()) CHECK(std::abs(x) <= bound);
  Rng q(1);
  CHECK(init_year_table(1810, 2009, 4, q).vectors == t.vectors);
  CHECK_THROWS_AS(init_year_table(1900, 1899, 4, q), InvalidArgument);
}
