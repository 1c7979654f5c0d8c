#include "chronotag/model.hpp"

#include <algorithm>
#include <cmath>

#include "chronotag/errors.hpp"
#include "chronotag/mathcore.hpp"

namespace chronotag {

std::string_view to_string(Architecture arch) noexcept {
  return arch == Architecture::lstm ? "lstm" : "ff";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "lstm") return Architecture::lstm;
  if (name == "ff" || name == "feedforward") return Architecture::feedforward;
  throw InvalidArgument("unknown architecture '" + std::string(name) + "' (expected lstm or ff)");
}

void ModelConfig::validate() const {
  if (hidden < 1) throw InvalidArgument("model: hidden size must be >= 1");
  if (tag_count < 2) throw InvalidArgument("model: need at least 2 tags");
  if (word_dim < 1) throw InvalidArgument("model: word_dim must be >= 1");
  if (use_year && year_dim < 1) throw InvalidArgument("model: year_dim must be >= 1 when use_year");
  if (max_len < 1) throw InvalidArgument("model: max_len must be >= 1");
}

namespace {

std::size_t hidden_rows(const ModelConfig& c) {
  return c.architecture == Architecture::lstm ? 4 * c.hidden : c.hidden;
}

std::size_t hidden_cols(const ModelConfig& c) {
  return c.architecture == Architecture::lstm ? c.input_width() + c.hidden : c.input_width();
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ConsistencyError(std::string("parameter ") + name + " has shape " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                           std::to_string(cols));
  }
}

// Writes [word vector; year vector] for one position into `out`.
void fill_input(const TaggerParams& params, const ModelConfig& config, int token, std::span<const double> year_vec,
                std::span<double> out) {
  const auto w = params.words->row(token);
  std::copy(w.begin(), w.end(), out.begin());
  if (config.use_year) std::copy(year_vec.begin(), year_vec.end(), out.begin() + config.word_dim);
}

}  // namespace

TaggerParams init_params(const ModelConfig& config, std::shared_ptr<const WordTable> words, YearRange years,
                         Rng& rng) {
  config.validate();
  if (!words || words->dim() != config.word_dim) throw InvalidArgument("init_params: word table dimension mismatch");
  Rng year_rng = rng.fork("year_table");
  Rng hidden_rng = rng.fork("hidden");
  Rng output_rng = rng.fork("output");
  TaggerParams p;
  p.words = std::move(words);
  p.years = init_year_table(years.min, years.max, std::max<std::size_t>(config.year_dim, 1), year_rng);
  p.hidden_weights = xavier_init(hidden_rows(config), hidden_cols(config), hidden_rng);
  p.hidden_bias = Matrix(1, hidden_rows(config));
  if (config.architecture == Architecture::lstm) {
    for (std::size_t k = config.hidden; k < 2 * config.hidden; ++k) p.hidden_bias(0, k) = 1.0;
  }
  p.output_weights = xavier_init(config.tag_count, config.hidden, output_rng);
  p.output_bias = Matrix(1, config.tag_count);
  return p;
}

void check_shapes(const TaggerParams& params, const ModelConfig& config) {
  config.validate();
  if (!params.words) throw ConsistencyError("parameters have no word table");
  require_shape(params.words->vectors, params.words->vectors.rows(), config.word_dim, "word_table");
  if (config.use_year) {
    require_shape(params.years.vectors, params.years.range.count(), config.year_dim, "year_table");
  }
  require_shape(params.hidden_weights, hidden_rows(config), hidden_cols(config), "hidden_weights");
  require_shape(params.hidden_bias, 1, hidden_rows(config), "hidden_bias");
  require_shape(params.output_weights, config.tag_count, config.hidden, "output_weights");
  require_shape(params.output_bias, 1, config.tag_count, "output_bias");
}

// ---------------------------------------------------------------------------

GradientSet GradientSet::zeros_like(const TaggerParams& p) {
  GradientSet g;
  g.years = Matrix(p.years.vectors.rows(), p.years.vectors.cols());
  g.hidden_weights = Matrix(p.hidden_weights.rows(), p.hidden_weights.cols());
  g.hidden_bias = Matrix(p.hidden_bias.rows(), p.hidden_bias.cols());
  g.output_weights = Matrix(p.output_weights.rows(), p.output_weights.cols());
  g.output_bias = Matrix(p.output_bias.rows(), p.output_bias.cols());
  return g;
}

void GradientSet::set_zero() noexcept {
  for (Matrix* m : {&years, &hidden_weights, &hidden_bias, &output_weights, &output_bias}) m->fill(0.0);
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  auto add = [](Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ConsistencyError("GradientSet: shape mismatch in +=");
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  };
  add(years, other.years);
  add(hidden_weights, other.hidden_weights);
  add(hidden_bias, other.hidden_bias);
  add(output_weights, other.output_weights);
  add(output_bias, other.output_bias);
  return *this;
}

void GradientSet::scale(double factor) noexcept {
  for (Matrix* m : {&years, &hidden_weights, &hidden_bias, &output_weights, &output_bias})
    for (auto& v : m->data()) v *= factor;
}

double GradientSet::squared_norm() const noexcept {
  double s = 0.0;
  for (const Matrix* m : {&years, &hidden_weights, &hidden_bias, &output_weights, &output_bias})
    for (double v : m->data()) s += v * v;
  return s;
}

bool GradientSet::all_finite() const noexcept {
  return years.all_finite() && hidden_weights.all_finite() && hidden_bias.all_finite() &&
         output_weights.all_finite() && output_bias.all_finite();
}

// ---------------------------------------------------------------------------

LstmStepResult lstm_step(const TaggerParams& params, const ModelConfig& config, std::span<const double> input,
                         std::span<const double> h_prev, std::span<const double> c_prev) {
  const std::size_t H = config.hidden;
  if (config.architecture != Architecture::lstm) throw InvalidArgument("lstm_step: model is not an LSTM");
  if (input.size() != config.input_width() || h_prev.size() != H || c_prev.size() != H) {
    throw InvalidArgument("lstm_step: vector width mismatch");
  }
  std::vector<double> xh(input.size() + H);
  std::copy(input.begin(), input.end(), xh.begin());
  std::copy(h_prev.begin(), h_prev.end(), xh.begin() + static_cast<std::ptrdiff_t>(input.size()));

  LstmStepResult r;
  r.gates.assign(params.hidden_bias.data().begin(), params.hidden_bias.data().end());
  gemv_add(params.hidden_weights, xh, r.gates);
  r.c.resize(H);
  r.h.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    const double i = sigmoid(r.gates[k]);
    const double f = sigmoid(r.gates[H + k]);
    const double g = std::tanh(r.gates[2 * H + k]);
    const double o = sigmoid(r.gates[3 * H + k]);
    r.gates[k] = i;
    r.gates[H + k] = f;
    r.gates[2 * H + k] = g;
    r.gates[3 * H + k] = o;
    r.c[k] = f * c_prev[k] + i * g;
    r.h[k] = o * std::tanh(r.c[k]);
  }
  return r;
}

ForwardTrace forward(const TaggerParams& params, const ModelConfig& config, std::span<const int> tokens,
                     int year) {
  if (tokens.empty()) throw InvalidArgument("forward: empty sentence");
  if (tokens.size() > config.max_len) {
    throw InvalidArgument("forward: sentence of length " + std::to_string(tokens.size()) + " exceeds max_len " +
                          std::to_string(config.max_len));
  }
  const std::size_t T = tokens.size();
  const std::size_t H = config.hidden;
  const std::size_t I = config.input_width();
  const std::size_t K = config.tag_count;
  std::span<const double> year_vec;
  if (config.use_year) year_vec = params.years.row(year);
  const auto vocab_rows = params.words->vectors.rows();
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_rows) throw InvalidArgument("forward: token id out of range");
  }

  ForwardTrace tr;
  tr.architecture = config.architecture;
  tr.use_year = config.use_year;
  tr.year = year;
  tr.inputs = Matrix(T, I);
  tr.hidden = Matrix(T, H);
  tr.log_probs = Matrix(T, K);
  std::vector<double> logits(K);

  if (config.architecture == Architecture::lstm) {
    tr.gates = Matrix(T, 4 * H);
    tr.cells = Matrix(T, H);
    std::vector<double> xh(I + H, 0.0);
    std::vector<double> c_prev(H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      fill_input(params, config, tokens[t], year_vec, tr.inputs.row(t));
      std::copy(tr.inputs.row(t).begin(), tr.inputs.row(t).end(), xh.begin());
      // xh tail already holds h_{t-1} (zero at t = 0).
      auto z = tr.gates.row(t);
      std::copy(params.hidden_bias.data().begin(), params.hidden_bias.data().end(), z.begin());
      gemv_add(params.hidden_weights, xh, z);
      auto c = tr.cells.row(t);
      auto h = tr.hidden.row(t);
      for (std::size_t k = 0; k < H; ++k) {
        const double i = sigmoid(z[k]);
        const double f = sigmoid(z[H + k]);
        const double g = std::tanh(z[2 * H + k]);
        const double o = sigmoid(z[3 * H + k]);
        z[k] = i;
        z[H + k] = f;
        z[2 * H + k] = g;
        z[3 * H + k] = o;
        c[k] = f * c_prev[k] + i * g;
        h[k] = o * std::tanh(c[k]);
      }
      std::copy(c.begin(), c.end(), c_prev.begin());
      std::copy(h.begin(), h.end(), xh.begin() + static_cast<std::ptrdiff_t>(I));
      std::copy(params.output_bias.data().begin(), params.output_bias.data().end(), logits.begin());
      gemv_add(params.output_weights, h, logits);
      log_softmax(logits, tr.log_probs.row(t));
    }
  } else {
    for (std::size_t t = 0; t < T; ++t) {
      auto u = tr.inputs.row(t);
      fill_input(params, config, tokens[t], year_vec, u);
      auto h = tr.hidden.row(t);
      std::copy(params.hidden_bias.data().begin(), params.hidden_bias.data().end(), h.begin());
      gemv_add(params.hidden_weights, u, h);
      for (auto& v : h) v = std::tanh(v);
      std::copy(params.output_bias.data().begin(), params.output_bias.data().end(), logits.begin());
      gemv_add(params.output_weights, h, logits);
      log_softmax(logits, tr.log_probs.row(t));
    }
  }
  return tr;
}

std::vector<std::uint8_t> known_tag_mask(std::span<const int> gold) {
  std::vector<std::uint8_t> mask(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) mask[i] = gold[i] >= 0 ? 1 : 0;
  return mask;
}

namespace {

void check_targets(std::size_t T, std::size_t K, std::span<const int> gold, std::span<const std::uint8_t> mask) {
  if (gold.size() != T || mask.size() != T) throw InvalidArgument("loss: gold/mask length differs from sentence");
  bool any = false;
  for (std::size_t t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    any = true;
    if (gold[t] < 0 || static_cast<std::size_t>(gold[t]) >= K) {
      throw InvalidArgument("loss: unmasked position " + std::to_string(t) + " has invalid gold tag");
    }
  }
  if (!any) throw InvalidArgument("loss: every position is masked");
}

}  // namespace

double loss(const Matrix& log_probs, std::span<const int> gold, std::span<const std::uint8_t> mask) {
  check_targets(log_probs.rows(), log_probs.cols(), gold, mask);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    if (!mask[t]) continue;
    total -= log_probs(t, static_cast<std::size_t>(gold[t]));
    ++n;
  }
  return total / static_cast<double>(n);
}

void accumulate_gradients(const ForwardTrace& trace, const TaggerParams& params, const ModelConfig& config,
                          std::span<const int> gold, std::span<const std::uint8_t> mask, double weight,
                          GradientSet& grads) {
  const std::size_t T = trace.length();
  const std::size_t H = config.hidden;
  const std::size_t I = config.input_width();
  const std::size_t K = config.tag_count;
  const std::size_t Dw = config.word_dim;
  if (trace.architecture != config.architecture || trace.use_year != config.use_year ||
      trace.inputs.cols() != I || trace.hidden.cols() != H || trace.log_probs.cols() != K) {
    throw ConsistencyError("backward: trace does not match model configuration");
  }
  check_targets(T, K, gold, mask);

  std::span<double> year_grad;
  if (config.use_year) year_grad = grads.years.row(params.years.row_of(trace.year));

  std::vector<double> dlogits(K);
  std::vector<double> dh(H);

  auto output_grad = [&](std::size_t t) {
    const auto lp = trace.log_probs.row(t);
    if (mask[t]) {
      for (std::size_t k = 0; k < K; ++k) dlogits[k] = weight * std::exp(lp[k]);
      dlogits[static_cast<std::size_t>(gold[t])] -= weight;
    } else {
      std::fill(dlogits.begin(), dlogits.end(), 0.0);
    }
    outer_add(grads.output_weights, dlogits, trace.hidden.row(t));
    for (std::size_t k = 0; k < K; ++k) grads.output_bias(0, k) += dlogits[k];
  };

  if (config.architecture == Architecture::feedforward) {
    std::vector<double> da(H);
    for (std::size_t t = 0; t < T; ++t) {
      if (!mask[t]) continue;
      output_grad(t);
      std::fill(dh.begin(), dh.end(), 0.0);
      gemv_transposed_add(params.output_weights, dlogits, dh);
      const auto h = trace.hidden.row(t);
      for (std::size_t k = 0; k < H; ++k) da[k] = dh[k] * (1.0 - h[k] * h[k]);
      outer_add(grads.hidden_weights, da, trace.inputs.row(t));
      for (std::size_t k = 0; k < H; ++k) grads.hidden_bias(0, k) += da[k];
      if (config.use_year) {
        for (std::size_t r = 0; r < H; ++r) {
          const double d = da[r];
          const auto w = params.hidden_weights.row(r);
          for (std::size_t c = Dw; c < I; ++c) year_grad[c - Dw] += d * w[c];
        }
      }
    }
    return;
  }

  // LSTM: backpropagation through time.
  std::vector<double> dh_next(H, 0.0);
  std::vector<double> dc_next(H, 0.0);
  std::vector<double> dz(4 * H);
  std::vector<double> xh(I + H);
  const std::vector<double> zeros(H, 0.0);
  for (std::size_t t = T; t-- > 0;) {
    output_grad(t);
    std::copy(dh_next.begin(), dh_next.end(), dh.begin());
    gemv_transposed_add(params.output_weights, dlogits, dh);

    const auto gates = trace.gates.row(t);
    const auto c = trace.cells.row(t);
    const std::span<const double> c_prev = t > 0 ? trace.cells.row(t - 1) : std::span<const double>(zeros);
    const std::span<const double> h_prev = t > 0 ? trace.hidden.row(t - 1) : std::span<const double>(zeros);
    for (std::size_t k = 0; k < H; ++k) {
      const double i = gates[k];
      const double f = gates[H + k];
      const double g = gates[2 * H + k];
      const double o = gates[3 * H + k];
      const double tc = std::tanh(c[k]);
      const double dc = dh[k] * o * (1.0 - tc * tc) + dc_next[k];
      const double d_o = dh[k] * tc;
      dz[k] = dc * g * i * (1.0 - i);
      dz[H + k] = dc * c_prev[k] * f * (1.0 - f);
      dz[2 * H + k] = dc * i * (1.0 - g * g);
      dz[3 * H + k] = d_o * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    const auto u = trace.inputs.row(t);
    std::copy(u.begin(), u.end(), xh.begin());
    std::copy(h_prev.begin(), h_prev.end(), xh.begin() + static_cast<std::ptrdiff_t>(I));
    outer_add(grads.hidden_weights, dz, xh);
    for (std::size_t k = 0; k < 4 * H; ++k) grads.hidden_bias(0, k) += dz[k];

    // Only the year slice and h_prev slice of W^T dz are needed.
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const double d = dz[r];
      if (d == 0.0) continue;
      const auto w = params.hidden_weights.row(r);
      if (config.use_year)
        for (std::size_t col = Dw; col < I; ++col) year_grad[col - Dw] += d * w[col];
      for (std::size_t k = 0; k < H; ++k) dh_next[k] += d * w[I + k];
    }
  }
}

GradientSet backward(const ForwardTrace& trace, const TaggerParams& params, const ModelConfig& config,
                     std::span<const int> gold, std::span<const std::uint8_t> mask) {
  check_targets(trace.length(), config.tag_count, gold, mask);
  const auto n = static_cast<double>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
  GradientSet grads = GradientSet::zeros_like(params);
  accumulate_gradients(trace, params, config, gold, mask, 1.0 / n, grads);
  return grads;
}

// ---------------------------------------------------------------------------

double GradCheckReport::max_rel_error() const noexcept {
  double worst = 0.0;
  for (const auto& g : groups) worst = std::max(worst, g.max_rel_error);
  return worst;
}

double relative_error(double analytic, double numeric, double floor) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport compare_gradients(const TaggerParams& params, const ModelConfig& config,
                                  std::span<const int> tokens, int year, std::span<const int> gold,
                                  std::span<const std::uint8_t> mask, const GradientSet& analytic, double step) {
  TaggerParams probe = params;
  auto sentence_loss = [&]() { return loss(forward(probe, config, tokens, year).log_probs, gold, mask); };

  struct Group {
    const char* name;
    Matrix* param;
    const Matrix* grad;
  };
  std::vector<Group> groups = {
      {"year_table", &probe.years.vectors, &analytic.years},
      {"hidden_weights", &probe.hidden_weights, &analytic.hidden_weights},
      {"hidden_bias", &probe.hidden_bias, &analytic.hidden_bias},
      {"output_weights", &probe.output_weights, &analytic.output_weights},
      {"output_bias", &probe.output_bias, &analytic.output_bias},
  };

  GradCheckReport report;
  for (const auto& grp : groups) {
    if (!grp.param->same_shape(*grp.grad)) throw ConsistencyError(std::string("grad_check: shape of ") + grp.name);
    GroupCheck gc;
    gc.group = grp.name;
    for (std::size_t r = 0; r < grp.param->rows(); ++r) {
      for (std::size_t c = 0; c < grp.param->cols(); ++c) {
        double& p = (*grp.param)(r, c);
        const double saved = p;
        p = saved + step;
        const double up = sentence_loss();
        p = saved - step;
        const double down = sentence_loss();
        p = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = (*grp.grad)(r, c);
        const double err = relative_error(a, numeric);
        if (err > gc.max_rel_error || gc.checked == 0) {
          gc.max_rel_error = err;
          gc.row = r;
          gc.col = c;
          gc.analytic = a;
          gc.numeric = numeric;
        }
        ++gc.checked;
      }
    }
    report.groups.push_back(gc);
  }
  return report;
}

GradCheckReport grad_check(const ModelConfig& config, std::uint64_t seed, GradCheckSetup setup) {
  config.validate();
  Rng rng(seed);
  Rng word_rng = rng.fork("words");
  auto words = std::make_shared<WordTable>();
  words->vectors = Matrix(setup.vocab_size, config.word_dim);
  for (auto& v : words->vectors.data()) v = word_rng.normal(0.0, 0.5);
  for (auto& v : words->vectors.row(0)) v = 0.0;

  Rng param_rng = rng.fork("params");
  TaggerParams params = init_params(config, words, setup.years, param_rng);
  // Nonzero biases exercise every term of the gate derivatives.
  Rng bias_rng = rng.fork("bias");
  for (Matrix* b : {&params.hidden_bias, &params.output_bias})
    for (auto& v : b->data()) v += bias_rng.uniform(-0.5, 0.5);

  Rng data_rng = rng.fork("data");
  std::vector<int> tokens(setup.length);
  std::vector<int> gold(setup.length);
  for (std::size_t t = 0; t < setup.length; ++t) {
    tokens[t] = 1 + static_cast<int>(data_rng.below(setup.vocab_size - 1));
    gold[t] = static_cast<int>(data_rng.below(config.tag_count));
  }
  const int year = setup.years.min + static_cast<int>(data_rng.below(setup.years.count()));
  const auto mask = known_tag_mask(gold);

  const ForwardTrace trace = forward(params, config, tokens, year);
  const GradientSet analytic = backward(trace, params, config, gold, mask);
  return compare_gradients(params, config, tokens, year, gold, mask, analytic);
}

}  // namespace chronotag
