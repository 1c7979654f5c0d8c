#include "chronotag/training.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "chronotag/errors.hpp"
#include "chronotag/mathcore.hpp"
#include "chronotag/parallel.hpp"

namespace chronotag {

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("train: learning_rate must be finite and >= 0");
  }
  if (clip_norm < 0.0) throw InvalidArgument("train: clip_norm must be >= 0");
}

std::vector<Batch> make_batches(const std::vector<EncodedSentence>& sentences, std::size_t max_len,
                                std::size_t batch_size, Rng* rng) {
  if (sentences.empty()) throw InvalidArgument("make_batches: empty dataset");
  if (batch_size < 1) throw InvalidArgument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (rng != nullptr) rng->shuffle(std::span<std::size_t>(order));

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    Batch b;
    b.max_len = max_len;
    b.tokens.assign(n * max_len, Vocabulary::kPad);
    b.tags.assign(n * max_len, TagSet::kUnknown);
    b.mask.assign(n * max_len, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = order[start + i];
      const auto& s = sentences[src];
      if (s.tokens.empty() || s.tokens.size() != s.tags.size()) {
        throw InvalidArgument("make_batches: sentence " + std::to_string(src) + " is empty or misaligned");
      }
      if (s.tokens.size() > max_len) {
        throw InvalidArgument("make_batches: sentence " + std::to_string(src) + " exceeds max_len");
      }
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        b.tokens[i * max_len + t] = s.tokens[t];
        b.tags[i * max_len + t] = s.tags[t];
        b.mask[i * max_len + t] = s.tags[t] >= 0 ? 1 : 0;
      }
      b.years.push_back(s.year);
      b.lengths.push_back(s.tokens.size());
      b.source.push_back(src);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

namespace {

std::size_t masked_tokens(const Batch& batch) {
  return static_cast<std::size_t>(std::count(batch.mask.begin(), batch.mask.end(), std::uint8_t{1}));
}

struct Optimizers {
  AdamState years, hidden_weights, hidden_bias, output_weights, output_bias;

  Optimizers(const TaggerParams& p, double lr)
      : years(p.years.vectors, {lr}),
        hidden_weights(p.hidden_weights, {lr}),
        hidden_bias(p.hidden_bias, {lr}),
        output_weights(p.output_weights, {lr}),
        output_bias(p.output_bias, {lr}) {}
};

void apply_update(TaggerParams& p, const GradientSet& g, const ModelConfig& config, const TrainConfig& tc,
                  Optimizers& opt) {
  if (tc.optimizer == Optimizer::adam) {
    if (config.use_year) adam_step(p.years.vectors, g.years, opt.years);
    adam_step(p.hidden_weights, g.hidden_weights, opt.hidden_weights);
    adam_step(p.hidden_bias, g.hidden_bias, opt.hidden_bias);
    adam_step(p.output_weights, g.output_weights, opt.output_weights);
    adam_step(p.output_bias, g.output_bias, opt.output_bias);
  } else {
    if (config.use_year) sgd_step(p.years.vectors, g.years, tc.learning_rate);
    sgd_step(p.hidden_weights, g.hidden_weights, tc.learning_rate);
    sgd_step(p.hidden_bias, g.hidden_bias, tc.learning_rate);
    sgd_step(p.output_weights, g.output_weights, tc.learning_rate);
    sgd_step(p.output_bias, g.output_bias, tc.learning_rate);
  }
}

std::string describe_sentence(const Batch& b, std::size_t row) {
  std::string s = "year " + std::to_string(b.years[row]) + ", token ids [";
  const auto toks = b.row_tokens(row);
  for (std::size_t i = 0; i < toks.size(); ++i) s += (i ? " " : "") + std::to_string(toks[i]);
  return s + "]";
}

}  // namespace

double batch_loss(const TaggerParams& params, const ModelConfig& config, const Batch& batch) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto mask = batch.row_mask(i);
    const std::size_t k = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
    if (k == 0) continue;
    const auto tr = forward(params, config, batch.row_tokens(i), batch.years[i]);
    total += loss(tr.log_probs, batch.row_tags(i), mask) * static_cast<double>(k);
    n += k;
  }
  if (n == 0) throw InvalidArgument("batch_loss: batch has no unmasked tokens");
  return total / static_cast<double>(n);
}

TrainReport train(TaggerParams& params, const ModelConfig& config, const std::vector<EncodedSentence>& train_set,
                  const std::vector<EncodedSentence>& test_set, const TrainConfig& tc, const ProgressFn& progress) {
  tc.validate();
  check_shapes(params, config);
  if (train_set.empty()) throw InvalidArgument("train: empty training set");
  const auto started = std::chrono::steady_clock::now();

  TrainReport report;
  report.initial_train_accuracy = evaluate_accuracy(params, config, train_set, tc.threads);

  Optimizers opt(params, tc.learning_rate);
  Rng shuffle_rng = Rng(tc.seed).fork("batch_order");
  const std::size_t threads = std::max<std::size_t>(1, tc.threads);
  std::vector<GradientSet> partial(threads, GradientSet::zeros_like(params));
  std::vector<double> partial_loss(threads);
  GradientSet grads = GradientSet::zeros_like(params);

  double interval_loss = 0.0;
  std::size_t interval_batches = 0;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto batches = make_batches(train_set, config.max_len, tc.batch_size, tc.shuffle ? &shuffle_rng : nullptr);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      const std::size_t n_tokens = masked_tokens(batch);
      if (n_tokens == 0) continue;
      const double weight = 1.0 / static_cast<double>(n_tokens);

      parallel_chunks(batch.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
        GradientSet& g = partial[chunk];
        g.set_zero();
        double lsum = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
          const auto mask = batch.row_mask(i);
          if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) == mask.end()) continue;
          const auto tr = forward(params, config, batch.row_tokens(i), batch.years[i]);
          const double l = loss(tr.log_probs, batch.row_tags(i), mask);
          if (!std::isfinite(l)) {
            throw NumericalFailure("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(bi) + ", training sentence " + std::to_string(batch.source[i]) +
                                   " (" + describe_sentence(batch, i) + ")");
          }
          const auto k = static_cast<double>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
          lsum += l * k;
          accumulate_gradients(tr, params, config, batch.row_tags(i), mask, weight, g);
        }
        partial_loss[chunk] = lsum;
      });

      grads.set_zero();
      double lsum = 0.0;
      const std::size_t used = std::min(threads, batch.size());
      for (std::size_t k = 0; k < used; ++k) {
        grads += partial[k];
        lsum += partial_loss[k];
      }
      if (!grads.all_finite()) {
        throw NumericalFailure("non-finite gradient in epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(bi));
      }
      if (tc.clip_norm > 0.0) {
        const double norm = std::sqrt(grads.squared_norm());
        if (norm > tc.clip_norm) grads.scale(tc.clip_norm / norm);
      }
      apply_update(params, grads, config, tc, opt);
      ++report.steps;
      report.sentences_seen += batch.size();

      interval_loss += lsum * weight;
      ++interval_batches;
      if (interval_batches == std::max<std::size_t>(1, tc.log_every)) {
        LossPoint pt{report.steps, interval_loss / static_cast<double>(interval_batches)};
        report.losses.push_back(pt);
        if (progress) progress(pt);
        interval_loss = 0.0;
        interval_batches = 0;
      }
    }
  }
  if (interval_batches > 0) {
    LossPoint pt{report.steps, interval_loss / static_cast<double>(interval_batches)};
    report.losses.push_back(pt);
    if (progress) progress(pt);
  }

  report.final_train_accuracy = evaluate_accuracy(params, config, train_set, tc.threads);
  report.final_test_accuracy = test_set.empty() ? 0.0 : evaluate_accuracy(params, config, test_set, tc.threads);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

double evaluate_accuracy(const TaggerParams& params, const ModelConfig& config,
                         const std::vector<EncodedSentence>& sentences, std::size_t threads) {
  if (sentences.empty()) throw InvalidArgument("evaluate_accuracy: no sentences");
  threads = std::max<std::size_t>(1, threads);
  std::vector<std::size_t> correct(threads, 0), total(threads, 0);
  parallel_chunks(sentences.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = sentences[i];
      const auto tr = forward(params, config, s.tokens, s.year);
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        ++total[chunk];
        if (s.tags[t] >= 0 && argmax(tr.log_probs.row(t)) == static_cast<std::size_t>(s.tags[t])) ++correct[chunk];
      }
    }
  });
  const auto c = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
  const auto n = std::accumulate(total.begin(), total.end(), std::size_t{0});
  return static_cast<double>(c) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'H', 'R', 'T', 'A', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw DataError("checkpoint truncated reading " + what);
  return value;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data().data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix get_matrix(std::istream& in, const std::string& name) {
  const auto rows = get<std::uint64_t>(in, name);
  const auto cols = get<std::uint64_t>(in, name);
  if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw DataError("checkpoint: implausible shape for " + name);
  Matrix m(rows, cols);
  if (!in.read(reinterpret_cast<char*>(m.data().data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
    throw DataError("checkpoint truncated reading " + name);
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const TaggerParams& params) {
  check_shapes(params, config);
  nlohmann::ordered_json header;
  header["architecture"] = std::string(to_string(config.architecture));
  header["use_year"] = config.use_year;
  header["word_dim"] = config.word_dim;
  header["year_dim"] = config.year_dim;
  header["hidden"] = config.hidden;
  header["tag_count"] = config.tag_count;
  header["max_len"] = config.max_len;
  header["year_min"] = params.years.range.min;
  header["year_max"] = params.years.range.max;
  const std::string text = header.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_matrix(out, params.words->vectors);
    put_matrix(out, params.years.vectors);
    put_matrix(out, params.hidden_weights);
    put_matrix(out, params.hidden_bias);
    put_matrix(out, params.output_weights);
    put_matrix(out, params.output_bias);
    if (!out) throw DataError("error writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + " is not a chronotag checkpoint");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get<std::uint64_t>(in, "header length");
  if (len > (1u << 20)) throw DataError("checkpoint header too large");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError("checkpoint truncated in header");

  Checkpoint ck;
  try {
    const auto h = nlohmann::json::parse(text);
    ck.config.architecture = parse_architecture(h.at("architecture").get<std::string>());
    ck.config.use_year = h.at("use_year").get<bool>();
    ck.config.word_dim = h.at("word_dim").get<std::size_t>();
    ck.config.year_dim = h.at("year_dim").get<std::size_t>();
    ck.config.hidden = h.at("hidden").get<std::size_t>();
    ck.config.tag_count = h.at("tag_count").get<std::size_t>();
    ck.config.max_len = h.at("max_len").get<std::size_t>();
    ck.params.years.range = {h.at("year_min").get<int>(), h.at("year_max").get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint header: ") + e.what());
  }
  auto words = std::make_shared<WordTable>();
  words->vectors = get_matrix(in, "word_table");
  ck.params.words = std::move(words);
  ck.params.years.vectors = get_matrix(in, "year_table");
  ck.params.hidden_weights = get_matrix(in, "hidden_weights");
  ck.params.hidden_bias = get_matrix(in, "hidden_bias");
  ck.params.output_weights = get_matrix(in, "output_weights");
  ck.params.output_bias = get_matrix(in, "output_bias");
  try {
    check_shapes(ck.params, ck.config);
  } catch (const std::exception& e) {
    throw DataError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return ck;
}

}  // namespace chronotag
