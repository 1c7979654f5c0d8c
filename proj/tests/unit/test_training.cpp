#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>

#include "chronotag/errors.hpp"
#include "chronotag/training.hpp"
#include "doctest.h"

using namespace chronotag;

namespace {

ModelConfig tiny(Architecture arch, bool use_year) {
  ModelConfig c;
  c.architecture = arch;
  c.use_year = use_year;
  c.word_dim = 6;
  c.year_dim = 3;
  c.hidden = 8;
  c.tag_count = 3;
  c.max_len = 12;
  return c;
}

// Tag is a function of the token, so a small model can learn it.
std::vector<EncodedSentence> toy_data(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  std::vector<EncodedSentence> out(n);
  for (auto& s : out) {
    s.year = 1810 + static_cast<int>(r.below(10));
    const auto len = 2 + r.below(8);
    for (std::uint64_t i = 0; i < len; ++i) {
      const int tok = 2 + static_cast<int>(r.below(12));
      s.tokens.push_back(tok);
      s.tags.push_back(tok % 3);
    }
  }
  return out;
}

TaggerParams toy_params(const ModelConfig& c, std::uint64_t seed) {
  Rng r(seed);
  auto w = std::make_shared<WordTable>();
  w->vectors = Matrix(14, c.word_dim);
  for (auto& v : w->vectors.data()) v = r.normal();
  for (auto& v : w->vectors.row(0)) v = 0.0;
  return init_params(c, w, {1810, 1819}, r);
}

bool same_params(const TaggerParams& a, const TaggerParams& b) {
  return a.years.vectors == b.years.vectors && a.hidden_weights == b.hidden_weights &&
         a.hidden_bias == b.hidden_bias && a.output_weights == b.output_weights && a.output_bias == b.output_bias;
}

}  // namespace

TEST_CASE("make_batches keeps the short final batch") {
  const auto data = toy_data(250, 1);
  const auto batches = make_batches(data, 12, 100, nullptr);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 100);
  CHECK(batches[1].size() == 100);
  CHECK(batches[2].size() == 50);
  std::size_t mask_sum = 0, tokens = 0;
  for (const auto& b : batches) mask_sum += std::accumulate(b.mask.begin(), b.mask.end(), std::size_t{0});
  for (const auto& s : data) tokens += s.tokens.size();
  CHECK(mask_sum == tokens);
  CHECK(batches[2].source.back() == 249);
}

TEST_CASE("make_batches pads and masks") {
  std::vector<EncodedSentence> data(1);
  data[0].year = 1812;
  data[0].tokens = {3, 4};
  data[0].tags = {1, TagSet::kUnknown};
  const auto b = make_batches(data, 4, 8, nullptr);
  REQUIRE(b.size() == 1);
  CHECK(b[0].tokens == std::vector<int>{3, 4, Vocabulary::kPad, Vocabulary::kPad});
  CHECK(b[0].mask == std::vector<std::uint8_t>{1, 0, 0, 0});
  CHECK(b[0].row_tokens(0).size() == 2);
  CHECK_THROWS_AS(make_batches(data, 1, 8, nullptr), InvalidArgument);
}

TEST_CASE("batch order depends only on the seed") {
  const auto data = toy_data(57, 2);
  Rng a(9), b(9), c(10);
  const auto x = make_batches(data, 12, 10, &a);
  const auto y = make_batches(data, 12, 10, &b);
  const auto z = make_batches(data, 12, 10, &c);
  REQUIRE(x.size() == 6);
  bool differs = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].source == y[i].source);
    differs = differs || x[i].source != z[i].source;
  }
  CHECK(differs);
  std::vector<std::size_t> all;
  for (const auto& bt : x) all.insert(all.end(), bt.source.begin(), bt.source.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  for (auto arch : {Architecture::lstm, Architecture::feedforward}) {
    for (bool use_year : {true, false}) {
      const auto c = tiny(arch, use_year);
      auto p = toy_params(c, 3);
      const auto before = p;
      TrainConfig tc;
      tc.learning_rate = 0.0;
      tc.batch_size = 16;
      tc.epochs = 2;
      const auto data = toy_data(40, 4);
      const auto r = train(p, c, data, data, tc);
      CHECK(same_params(p, before));
      CHECK(r.final_train_accuracy == r.initial_train_accuracy);
      CHECK(r.steps == 6);
    }
  }
}

TEST_CASE("training never touches the word table or an unused year table") {
  const auto c = tiny(Architecture::lstm, false);
  auto p = toy_params(c, 5);
  const Matrix words = p.words->vectors;
  const Matrix years = p.years.vectors;
  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.batch_size = 8;
  train(p, c, toy_data(30, 6), {}, tc);
  CHECK(p.words->vectors == words);
  CHECK(p.years.vectors == years);
  CHECK_FALSE(p.hidden_weights == toy_params(c, 5).hidden_weights);
}

TEST_CASE("a small descent step lowers the batch loss") {
  for (auto arch : {Architecture::lstm, Architecture::feedforward}) {
    const auto c = tiny(arch, true);
    auto p = toy_params(c, 7);
    const auto data = toy_data(20, 8);
    const auto batches = make_batches(data, c.max_len, 20, nullptr);
    const double before = batch_loss(p, c, batches[0]);
    TrainConfig tc;
    tc.learning_rate = 1e-4;
    tc.batch_size = 20;
    tc.shuffle = false;
    tc.optimizer = Optimizer::sgd;
    train(p, c, data, {}, tc);
    CHECK(batch_loss(p, c, batches[0]) < before);
  }
}

TEST_CASE("training learns a token-determined tagging") {
  const auto c = tiny(Architecture::feedforward, false);
  auto p = toy_params(c, 9);
  TrainConfig tc;
  tc.learning_rate = 0.02;
  tc.batch_size = 20;
  tc.epochs = 30;
  const auto data = toy_data(200, 10);
  const auto r = train(p, c, data, toy_data(50, 11), tc);
  CHECK(r.final_train_accuracy > 0.99);
  CHECK(r.final_test_accuracy > 0.99);
  CHECK(r.losses.back().mean_loss < r.losses.front().mean_loss);
}

TEST_CASE("training is reproducible for a fixed thread count") {
  const auto c = tiny(Architecture::lstm, true);
  const auto data = toy_data(60, 12);
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.batch_size = 16;
  tc.epochs = 2;
  tc.seed = 4;
  auto a = toy_params(c, 13);
  auto b = toy_params(c, 13);
  train(a, c, data, {}, tc);
  train(b, c, data, {}, tc);
  CHECK(same_params(a, b));
  tc.threads = 3;
  auto d = toy_params(c, 13);
  auto e = toy_params(c, 13);
  train(d, c, data, {}, tc);
  train(e, c, data, {}, tc);
  CHECK(same_params(d, e));
}

TEST_CASE("argmax and accuracy") {
  CHECK(argmax(std::vector<double>{0.1, 0.5, 0.5}) == 1);
  CHECK(argmax(std::vector<double>{-1.0}) == 0);

  // A model whose output depends on nothing predicts one tag everywhere.
  const auto c = tiny(Architecture::feedforward, false);
  auto p = toy_params(c, 14);
  p.output_weights.fill(0.0);
  p.output_bias.fill(0.0);
  p.output_bias(0, 2) = 1.0;
  std::vector<EncodedSentence> data(2);
  data[0] = {1810, {2, 3, 4, 5, 6}, {2, 2, 0, 1, 0}};
  data[1] = {1811, {2, 3, 4, 5, 6}, {2, 0, 1, TagSet::kUnknown, 0}};
  CHECK(evaluate_accuracy(p, c, data) == doctest::Approx(0.3));
  CHECK(evaluate_accuracy(p, c, data, 4) == doctest::Approx(0.3));
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "chronotag_ckpt_test";
  std::filesystem::create_directories(dir);
  for (auto arch : {Architecture::lstm, Architecture::feedforward}) {
    const auto c = tiny(arch, true);
    const auto p = toy_params(c, 15);
    const auto path = dir / "m.ckpt";
    save_checkpoint(path, c, p);
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    const auto ck = load_checkpoint(path);
    CHECK(ck.config == c);
    CHECK(ck.params.words->vectors == p.words->vectors);
    CHECK(same_params(ck.params, p));
    CHECK(ck.params.years.range.min == 1810);
    const auto data = toy_data(30, 16);
    CHECK(evaluate_accuracy(ck.params, ck.config, data) == evaluate_accuracy(p, c, data));
  }
  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), DataError);
  // Truncation.
  const auto c = tiny(Architecture::lstm, true);
  save_checkpoint(dir / "t.ckpt", c, toy_params(c, 1));
  std::filesystem::resize_file(dir / "t.ckpt", std::filesystem::file_size(dir / "t.ckpt") - 9);
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid training configuration") {
  const auto c = tiny(Architecture::lstm, true);
  auto p = toy_params(c, 1);
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(train(p, c, toy_data(3, 1), {}, tc), InvalidArgument);
  tc.batch_size = 4;
  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(train(p, c, toy_data(3, 1), {}, tc), InvalidArgument);
  tc.learning_rate = 0.1;
  CHECK_THROWS_AS(train(p, c, {}, {}, tc), InvalidArgument);
}
