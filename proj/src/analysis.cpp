#include "chronotag/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "chronotag/errors.hpp"
#include "chronotag/mathcore.hpp"
#include "chronotag/parallel.hpp"

namespace chronotag {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("fit_line: x and y differ in length");
  if (x.size() < 2) throw DegenerateInput("fit_line: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw DegenerateInput("fit_line: x has zero variance");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return f;
}

// ---------------------------------------------------------------------------

EmbeddingProjection pca_first_component(const Matrix& vectors, std::span<const int> years, PcaOptions options) {
  const std::size_t n = vectors.rows();
  const std::size_t d = vectors.cols();
  if (years.size() != n) throw InvalidArgument("pca: one year per row required");
  if (n < 2 || d < 1) throw DegenerateInput("pca: need at least 2 rows");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += vectors(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = vectors(i, j) - mean[j];

  Matrix cov(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = centered.row(i);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) cov(a, b) += r[a] * r[b];
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= static_cast<double>(n - 1);
      cov(b, a) = cov(a, b);
    }
    trace += cov(a, a);
  }
  if (!(trace > 0.0)) throw DegenerateInput("pca: embeddings have zero variance");

  // Fixed start vector so results do not depend on any caller RNG.
  Rng rng(0x9ca5eedULL);
  std::vector<double> v(d), next(d);
  for (auto& x : v) x = rng.normal();
  auto normalise = [](std::vector<double>& x) {
    const double norm = std::sqrt(dot(x, x));
    for (auto& e : x) e /= norm;
    return norm;
  };
  normalise(v);
  double lambda = 0.0;
  EmbeddingProjection out;
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    gemv_add(cov, v, next);
    lambda = normalise(next);
    if (!std::isfinite(lambda) || lambda <= 0.0) throw NumericalFailure("pca: power iteration collapsed");
    // Compare up to sign.
    double diff_pos = 0.0, diff_neg = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      diff_pos = std::max(diff_pos, std::abs(next[j] - v[j]));
      diff_neg = std::max(diff_neg, std::abs(next[j] + v[j]));
    }
    v.swap(next);
    out.iterations = it;
    if (std::min(diff_pos, diff_neg) < options.tolerance) break;
  }

  out.years.assign(years.begin(), years.end());
  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.scores[i] = dot(centered.row(i), v);
  std::vector<double> xs(years.begin(), years.end());
  out.fit = fit_line(xs, out.scores);
  if (out.fit.slope < 0.0) {
    for (auto& e : v) e = -e;
    for (auto& s : out.scores) s = -s;
    out.fit.slope = -out.fit.slope;
    out.fit.intercept = -out.fit.intercept;
  }
  out.component = std::move(v);
  out.eigenvalue = lambda;
  out.explained_variance_ratio = lambda / trace;
  return out;
}

EmbeddingProjection pca_first_component(const YearTable& table, PcaOptions options) {
  std::vector<int> years(table.range.count());
  std::iota(years.begin(), years.end(), table.range.min);
  return pca_first_component(table.vectors, years, options);
}

// ---------------------------------------------------------------------------

namespace {

double mean_nll(const Matrix& log_probs, std::span<const int> gold) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    if (gold[t] < 0) continue;
    total -= log_probs(t, static_cast<std::size_t>(gold[t]));
    ++n;
  }
  if (n == 0) throw InvalidArgument("perplexity: sentence has no known gold tags");
  return total / static_cast<double>(n);
}

// out += W[:, c0 .. c0 + v.size()) * v
void gemv_block_add(const Matrix& W, std::size_t c0, std::span<const double> v, std::span<double> out) {
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double* w = W.row(r).data() + c0;
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) s += w[j] * v[j];
    out[r] += s;
  }
}

// Per-sentence scorer that shares the word and year parts of the first
// affine map across candidate years.
class SweepScorer {
 public:
  SweepScorer(const TaggerParams& p, const ModelConfig& c, YearRange years) : p_(p), c_(c), years_(years) {
    check_shapes(p, c);
    const std::size_t rows = p.hidden_weights.rows();
    if (c.use_year) {
      year_proj_ = Matrix(years.count(), rows);
      for (int y = years.min; y <= years.max; ++y) {
        gemv_block_add(p.hidden_weights, c.word_dim, p.years.row(y),
                       year_proj_.row(static_cast<std::size_t>(y - years.min)));
      }
    }
  }

  // Fills out[k] with the perplexity of `s` at year years.min + k.
  void score(const EncodedSentence& s, std::span<double> out) const {
    const std::size_t T = s.tokens.size();
    if (T == 0) throw InvalidArgument("perplexity: empty sentence");
    if (T > c_.max_len) throw InvalidArgument("perplexity: sentence longer than max_len");
    const std::size_t rows = p_.hidden_weights.rows();
    Matrix word_proj(T, rows);
    for (std::size_t t = 0; t < T; ++t) {
      const int tok = s.tokens[t];
      if (tok < 0 || static_cast<std::size_t>(tok) >= p_.words->vectors.rows())
        throw InvalidArgument("perplexity: token id out of range");
      auto row = word_proj.row(t);
      std::copy(p_.hidden_bias.data().begin(), p_.hidden_bias.data().end(), row.begin());
      gemv_block_add(p_.hidden_weights, 0, p_.words->row(tok), row);
    }
    if (!c_.use_year) {
      std::fill(out.begin(), out.end(), std::exp(run(s, word_proj, {})));
      return;
    }
    for (std::size_t k = 0; k < years_.count(); ++k) out[k] = std::exp(run(s, word_proj, year_proj_.row(k)));
  }

 private:
  double run(const EncodedSentence& s, const Matrix& word_proj, std::span<const double> year_proj) const {
    const std::size_t T = s.tokens.size();
    const std::size_t H = c_.hidden;
    const std::size_t K = c_.tag_count;
    const std::size_t rows = p_.hidden_weights.rows();
    Matrix log_probs(T, K);
    std::vector<double> z(rows), h(H, 0.0), cell(H, 0.0), logits(K);
    for (std::size_t t = 0; t < T; ++t) {
      const auto wp = word_proj.row(t);
      std::copy(wp.begin(), wp.end(), z.begin());
      if (!year_proj.empty())
        for (std::size_t r = 0; r < rows; ++r) z[r] += year_proj[r];
      if (c_.architecture == Architecture::lstm) {
        if (t > 0) gemv_block_add(p_.hidden_weights, c_.input_width(), h, z);
        for (std::size_t k = 0; k < H; ++k) {
          const double i = sigmoid(z[k]);
          const double f = sigmoid(z[H + k]);
          const double g = std::tanh(z[2 * H + k]);
          const double o = sigmoid(z[3 * H + k]);
          cell[k] = f * cell[k] + i * g;
          h[k] = o * std::tanh(cell[k]);
        }
      } else {
        for (std::size_t k = 0; k < H; ++k) h[k] = std::tanh(z[k]);
      }
      std::copy(p_.output_bias.data().begin(), p_.output_bias.data().end(), logits.begin());
      gemv_add(p_.output_weights, h, logits);
      log_softmax(logits, log_probs.row(t));
    }
    return mean_nll(log_probs, s.tags);
  }

  const TaggerParams& p_;
  const ModelConfig& c_;
  YearRange years_;
  Matrix year_proj_;
};

}  // namespace

double sentence_perplexity(const TaggerParams& params, const ModelConfig& config, const EncodedSentence& sentence,
                           int year) {
  const auto trace = forward(params, config, sentence.tokens, year);
  return std::exp(mean_nll(trace.log_probs, sentence.tags));
}

Matrix perplexity_table(const TaggerParams& params, const ModelConfig& config,
                        const std::vector<EncodedSentence>& sentences, YearRange years, std::size_t threads) {
  if (years.max < years.min) throw InvalidArgument("perplexity_table: empty year range");
  if (config.use_year && (years.min < params.years.range.min || years.max > params.years.range.max))
    throw InvalidArgument("perplexity_table: candidate years outside the model's year table");
  const SweepScorer scorer(params, config, years);
  Matrix table(sentences.size(), years.count());
  parallel_chunks(sentences.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) scorer.score(sentences[i], table.row(i));
  });
  return table;
}

std::vector<double> perplexity_sweep(const TaggerParams& params, const ModelConfig& config,
                                     const std::vector<EncodedSentence>& sentences, YearRange years,
                                     std::size_t threads) {
  if (sentences.empty()) throw InvalidArgument("perplexity_sweep: no sentences");
  const Matrix table = perplexity_table(params, config, sentences, years, threads);
  std::vector<double> mean(years.count(), 0.0);
  for (std::size_t i = 0; i < table.rows(); ++i)
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += table(i, k);
  for (auto& m : mean) m /= static_cast<double>(table.rows());
  return mean;
}

// ---------------------------------------------------------------------------

namespace {

double tricube(double u) {
  if (u >= 1.0) return 0.0;
  const double a = 1.0 - u * u * u;
  return a * a * a;
}

double bisquare(double u) {
  if (u >= 1.0) return 0.0;
  const double a = 1.0 - u * u;
  return a * a;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<double> lowess(std::span<const double> x, std::span<const double> y, LowessOptions options) {
  const std::size_t n = x.size();
  if (y.size() != n) throw InvalidArgument("lowess: x and y differ in length");
  if (!(options.frac > 0.0 && options.frac <= 1.0)) throw InvalidArgument("lowess: frac must lie in (0, 1]");
  if (n == 0) return {};
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InvalidArgument("lowess: non-finite input");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  const double range = xs.back() - xs.front();
  if (range <= 0.0) throw DegenerateInput("lowess: all x values are identical");

  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(options.frac * static_cast<double>(n) - 1e-9)), std::min<std::size_t>(2, n),
      n);

  std::vector<double> robust(n, 1.0), fitted(n), w(n);
  for (std::size_t pass = 0; pass <= options.iterations; ++pass) {
    std::size_t lo = 0, hi = k - 1;
    for (std::size_t i = 0; i < n; ++i) {
      while (hi + 1 < n && xs[hi + 1] - xs[i] < xs[i] - xs[lo]) {
        ++lo;
        ++hi;
      }
      const double h = std::max(xs[i] - xs[lo], xs[hi] - xs[i]);
      // Points tied with the window edge are neighbours too.
      std::size_t a = lo, b = hi;
      while (a > 0 && xs[i] - xs[a - 1] <= h) --a;
      while (b + 1 < n && xs[b + 1] - xs[i] <= h) ++b;
      double sw = 0.0;
      for (std::size_t j = a; j <= b; ++j) {
        const double u = h > 0.0 ? std::abs(xs[j] - xs[i]) / h : 0.0;
        w[j] = robust[j] * tricube(u);
        sw += w[j];
      }
      if (sw <= 0.0) {
        fitted[i] = ys[i];
        continue;
      }
      double xbar = 0.0, ybar = 0.0;
      for (std::size_t j = a; j <= b; ++j) {
        w[j] /= sw;
        xbar += w[j] * xs[j];
        ybar += w[j] * ys[j];
      }
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t j = a; j <= b; ++j) {
        sxx += w[j] * (xs[j] - xbar) * (xs[j] - xbar);
        sxy += w[j] * (xs[j] - xbar) * ys[j];
      }
      fitted[i] = ybar;
      if (std::sqrt(sxx) > 1e-3 * range) fitted[i] += sxy / sxx * (xs[i] - xbar);
    }
    if (pass == options.iterations) break;

    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = std::abs(ys[i] - fitted[i]);
    const double s = 6.0 * median(resid);
    double scale = 0.0;
    for (double v : ys) scale += std::abs(v);
    if (s <= 1e-7 * scale / static_cast<double>(n)) break;
    for (std::size_t i = 0; i < n; ++i) robust[i] = bisquare(resid[i] / s);
  }

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[order[i]] = fitted[i];
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(BucketKind kind) noexcept { return kind == BucketKind::decade ? "decade" : "year"; }

BucketKind parse_bucket_kind(std::string_view name) {
  if (name == "decade") return BucketKind::decade;
  if (name == "year") return BucketKind::year;
  throw InvalidArgument("unknown bucket kind '" + std::string(name) + "' (expected decade or year)");
}

namespace {

Bucket bucket_for(int year, BucketKind kind) {
  Bucket b;
  if (kind == BucketKind::decade) {
    b.start = decade_of(year);
    b.center = b.start + 5;
    b.label = decade_label(b.start);
  } else {
    b.start = year;
    b.center = year;
    b.label = std::to_string(year);
  }
  return b;
}

}  // namespace

std::vector<Bucket> make_buckets(const std::vector<EncodedSentence>& sentences, BucketKind kind) {
  std::map<int, Bucket> by_start;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    Bucket proto = bucket_for(sentences[i].year, kind);
    auto [it, inserted] = by_start.try_emplace(proto.start, std::move(proto));
    it->second.members.push_back(i);
  }
  std::vector<Bucket> out;
  out.reserve(by_start.size());
  for (auto& [start, b] : by_start) out.push_back(std::move(b));
  return out;
}

std::vector<Bucket> range_buckets(YearRange range, BucketKind kind) {
  std::vector<Bucket> out;
  const int step = kind == BucketKind::decade ? 10 : 1;
  const int first = kind == BucketKind::decade ? decade_of(range.min) : range.min;
  for (int s = first; s <= range.max; s += step) out.push_back(bucket_for(s, kind));
  return out;
}

int predict_year(std::span<const int> years, std::span<const double> smoothed) {
  if (years.empty() || years.size() != smoothed.size()) throw InvalidArgument("predict_year: bad curve");
  std::size_t best = 0;
  for (std::size_t k = 1; k < smoothed.size(); ++k) {
    if (smoothed[k] < smoothed[best] || (smoothed[k] == smoothed[best] && years[k] < years[best])) best = k;
  }
  return years[best];
}

std::vector<PerplexityCurve> bucket_curves(const Matrix& table, const std::vector<Bucket>& buckets, YearRange years,
                                           LowessOptions options) {
  if (table.cols() != years.count()) throw InvalidArgument("bucket_curves: table width differs from year range");
  std::vector<int> ys(years.count());
  std::iota(ys.begin(), ys.end(), years.min);
  const std::vector<double> xs(ys.begin(), ys.end());
  std::vector<PerplexityCurve> out;
  out.reserve(buckets.size());
  for (const auto& b : buckets) {
    if (b.members.empty()) continue;
    PerplexityCurve c;
    c.label = b.label;
    c.center = b.center;
    c.sentence_count = b.members.size();
    c.years = ys;
    c.raw.assign(ys.size(), 0.0);
    for (std::size_t i : b.members) {
      if (i >= table.rows()) throw InvalidArgument("bucket_curves: member index out of range");
      for (std::size_t k = 0; k < ys.size(); ++k) c.raw[k] += table(i, k);
    }
    for (auto& v : c.raw) v /= static_cast<double>(b.members.size());
    c.smoothed = lowess(xs, c.raw, options);
    c.predicted_year = predict_year(c.years, c.smoothed);
    out.push_back(std::move(c));
  }
  return out;
}

int default_baseline_year(YearRange range) noexcept { return (range.min + range.max + 1) / 2; }

DatingReport dating_metric(std::span<const int> centers, std::span<const int> predictions, BucketKind kind,
                           int baseline_year, std::span<const std::string> labels) {
  if (centers.size() != predictions.size()) throw InvalidArgument("dating_metric: length mismatch");
  if (!labels.empty() && labels.size() != centers.size()) throw InvalidArgument("dating_metric: label count");
  if (centers.empty()) throw InvalidArgument("dating_metric: no buckets");
  DatingReport r;
  r.kind = kind;
  r.baseline_year = baseline_year;
  double err = 0.0, base = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    DatingRow row;
    row.label = labels.empty() ? std::to_string(centers[i]) : labels[i];
    row.center = centers[i];
    row.predicted = predictions[i];
    row.abs_error = std::abs(predictions[i] - centers[i]);
    err += row.abs_error;
    base += std::abs(baseline_year - centers[i]);
    r.rows.push_back(std::move(row));
  }
  r.mean_abs_error = err / static_cast<double>(centers.size());
  r.baseline = base / static_cast<double>(centers.size());
  return r;
}

DatingReport dating_metric(const std::vector<PerplexityCurve>& curves, BucketKind kind, int baseline_year) {
  std::vector<int> centers, preds;
  std::vector<std::string> labels;
  for (const auto& c : curves) {
    centers.push_back(c.center);
    preds.push_back(c.predicted_year);
    labels.push_back(c.label);
  }
  return dating_metric(centers, preds, kind, baseline_year, labels);
}

double baseline_metric(YearRange range, BucketKind kind, int baseline_year) {
  const auto buckets = range_buckets(range, kind);
  double total = 0.0;
  for (const auto& b : buckets) total += std::abs(baseline_year - b.center);
  return total / static_cast<double>(buckets.size());
}

std::vector<SentenceError> per_sentence_error_report(ScoredModel lstm, ScoredModel ff,
                                                     const std::vector<EncodedSentence>& sentences, YearRange years,
                                                     SentenceReportOptions options) {
  std::vector<EncodedSentence> kept;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].tokens.size() > options.min_length) {
      kept.push_back(sentences[i]);
      index.push_back(i);
    }
  }
  if (kept.empty()) return {};
  const Matrix lt = perplexity_table(*lstm.params, *lstm.config, kept, years, options.threads);
  const Matrix ft = perplexity_table(*ff.params, *ff.config, kept, years, options.threads);
  std::vector<int> ys(years.count());
  std::iota(ys.begin(), ys.end(), years.min);
  const std::vector<double> xs(ys.begin(), ys.end());

  std::vector<SentenceError> out(kept.size());
  parallel_chunks(kept.size(), options.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& e = out[i];
      e.index = index[i];
      e.year = kept[i].year;
      const auto lrow = lt.row(i);
      const auto frow = ft.row(i);
      e.lstm_predicted = predict_year(ys, lowess(xs, std::vector<double>(lrow.begin(), lrow.end()), options.lowess));
      e.ff_predicted = predict_year(ys, lowess(xs, std::vector<double>(frow.begin(), frow.end()), options.lowess));
      e.lstm_error = std::abs(e.lstm_predicted - e.year);
      e.ff_error = std::abs(e.ff_predicted - e.year);
    }
  });
  std::stable_sort(out.begin(), out.end(),
                   [](const SentenceError& a, const SentenceError& b) { return a.lstm_error < b.lstm_error; });
  if (out.size() > options.top_k) out.resize(options.top_k);
  return out;
}

}  // namespace chronotag
