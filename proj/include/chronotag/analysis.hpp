#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronotag/corpus.hpp"
#include "chronotag/matrix.hpp"
#include "chronotag/model.hpp"

namespace chronotag {

// ---------------------------------------------------------------- regression

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares of y on x. Throws DegenerateInput when x is constant.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// ----------------------------------------------------------------------- PCA

struct PcaOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
};

struct EmbeddingProjection {
  std::vector<int> years;
  std::vector<double> scores;     // projection of each centered row on PC1
  std::vector<double> component;  // unit PC1 direction
  double eigenvalue = 0.0;
  double explained_variance_ratio = 0.0;
  LinearFit fit;  // scores regressed on years
  std::size_t iterations = 0;
};

// Dominant eigenvector of the sample covariance (1/(n-1)) of `vectors` by
// power iteration, oriented so the regression slope of scores on `years` is
// non-negative. Throws DegenerateInput on zero variance.
EmbeddingProjection pca_first_component(const Matrix& vectors, std::span<const int> years, PcaOptions options = {});

// Convenience for a trained year table: one row per year of its range.
EmbeddingProjection pca_first_component(const YearTable& table, PcaOptions options = {});

// ---------------------------------------------------------------- perplexity

// exp(mean over known-tag tokens of -ln p(gold | model, year)).
double sentence_perplexity(const TaggerParams& params, const ModelConfig& config, const EncodedSentence& sentence,
                           int year);

// Sentence x candidate-year perplexities, rows in input order, columns
// years.min..years.max. Uses cached input projections, so entries agree with
// sentence_perplexity to rounding, not bitwise.
Matrix perplexity_table(const TaggerParams& params, const ModelConfig& config,
                        const std::vector<EncodedSentence>& sentences, YearRange years, std::size_t threads = 1);

// Mean perplexity per candidate year over `sentences`.
std::vector<double> perplexity_sweep(const TaggerParams& params, const ModelConfig& config,
                                     const std::vector<EncodedSentence>& sentences, YearRange years,
                                     std::size_t threads = 1);

// -------------------------------------------------------------------- LOWESS

struct LowessOptions {
  double frac = 0.25;
  std::size_t iterations = 2;
};

// Cleveland's robust locally weighted linear regression. Each point is fit
// on its ceil(frac * n) nearest neighbours with tricube weights; `iterations`
// robustifying passes reweight by the bisquare of residual / (6 * median
// |residual|). Returns fitted values in input order.
std::vector<double> lowess(std::span<const double> x, std::span<const double> y, LowessOptions options = {});

// ------------------------------------------------------------------- dating

enum class BucketKind { decade, year };

std::string_view to_string(BucketKind kind) noexcept;
BucketKind parse_bucket_kind(std::string_view name);

struct Bucket {
  std::string label;  // "1840s" or "1843"
  int start = 0;      // first year of the bucket
  int center = 0;     // decade start + 5, or the year itself
  std::vector<std::size_t> members;
};

// Buckets present in `sentences`, ordered by start year.
std::vector<Bucket> make_buckets(const std::vector<EncodedSentence>& sentences, BucketKind kind);
// Every bucket of `range`, empty member lists.
std::vector<Bucket> range_buckets(YearRange range, BucketKind kind);

struct PerplexityCurve {
  std::string label;
  int center = 0;
  std::size_t sentence_count = 0;
  std::vector<int> years;
  std::vector<double> raw;       // mean perplexity per candidate year
  std::vector<double> smoothed;  // LOWESS of raw
  int predicted_year = 0;
};

// Earliest candidate year attaining the minimum smoothed value.
int predict_year(std::span<const int> years, std::span<const double> smoothed);
inline int predict_year(const PerplexityCurve& curve) { return predict_year(curve.years, curve.smoothed); }

// Builds one curve per bucket from a perplexity_table over `years`.
std::vector<PerplexityCurve> bucket_curves(const Matrix& table, const std::vector<Bucket>& buckets, YearRange years,
                                           LowessOptions options = {});

struct DatingRow {
  std::string label;
  int center = 0;
  int predicted = 0;
  int abs_error = 0;
};

struct DatingReport {
  BucketKind kind = BucketKind::decade;
  std::vector<DatingRow> rows;
  double mean_abs_error = 0.0;
  double baseline = 0.0;  // same metric for the constant baseline prediction
  int baseline_year = 1910;
};

int default_baseline_year(YearRange range) noexcept;  // (min + max + 1) / 2

DatingReport dating_metric(const std::vector<PerplexityCurve>& curves, BucketKind kind, int baseline_year = 1910);
DatingReport dating_metric(std::span<const int> centers, std::span<const int> predictions, BucketKind kind,
                           int baseline_year = 1910, std::span<const std::string> labels = {});

// Mean |baseline_year - center| over every bucket of `range`.
double baseline_metric(YearRange range, BucketKind kind, int baseline_year);

struct SentenceError {
  std::size_t index = 0;  // position in the input sentence list
  int year = 0;
  int lstm_predicted = 0;
  int lstm_error = 0;
  int ff_predicted = 0;
  int ff_error = 0;
};

struct SentenceReportOptions {
  std::size_t top_k = 10;
  std::size_t min_length = 5;  // keep sentences strictly longer than this
  LowessOptions lowess;
  std::size_t threads = 1;
};

struct ScoredModel {
  const TaggerParams* params;
  const ModelConfig* config;
};

// Dates each sentence on its own with both models; ascending by LSTM error
// (ties by input index), truncated to top_k.
std::vector<SentenceError> per_sentence_error_report(ScoredModel lstm, ScoredModel ff,
                                                     const std::vector<EncodedSentence>& sentences, YearRange years,
                                                     SentenceReportOptions options = {});

}  // namespace chronotag
