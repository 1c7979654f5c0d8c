#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chronotag/analysis.hpp"
#include "chronotag/errors.hpp"
#include "chronotag/model.hpp"
#include "chronotag/pipeline.hpp"
#include "chronotag/reports.hpp"
#include "chronotag/synthgen.hpp"
#include "chronotag/training.hpp"

namespace chronotag::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// --config files: a JSON object whose scalar keys are global flags and whose
// object-valued keys hold the flags of the subcommand of that name. A run
// manifest is accepted too, so a run can be replayed from its own record.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json root;
    try {
      root = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (root.contains("subcommand") && root.contains("config")) root = root["config"];
    if (!root.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : root.items()) {
      if (value.is_object()) {
        for (const auto& [k, v] : value.items()) add(items, {key}, k, v);
      } else {
        add(items, {}, key, value);
      }
    }
    return items;
  }

 private:
  static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

  static void add(std::vector<CLI::ConfigItem>& items, std::vector<std::string> parents, std::string name,
                  const json& v) {
    if (v.is_null()) return;
    for (auto& c : name) {
      if (c == '_') c = '-';
    }
    CLI::ConfigItem item;
    item.parents = std::move(parents);
    item.name = std::move(name);
    if (v.is_array()) {
      for (const auto& e : v) item.inputs.push_back(scalar(e));
    } else {
      item.inputs.push_back(scalar(v));
    }
    items.push_back(std::move(item));
  }
};

// ------------------------------------------------------------------ options

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  int year_min = 1810;
  int year_max = 2009;

  YearRange years() const { return {year_min, year_max}; }
  json to_json() const {
    return {{"seed", seed}, {"threads", threads}, {"year-min", year_min}, {"year-max", year_max}};
  }
};

struct SynthOpts {
  std::string output;
  std::string mode = "syntactic";
  std::size_t per_decade = 500;
  double slope = 40.0;
  double midpoint = 1910.0;
  double lexical_strength = 0.6;
  std::size_t min_len = 5;
  std::size_t max_len = 20;
  bool shuffle_tokens = false;

  json to_json() const {
    return {{"output", output},       {"mode", mode},        {"per-decade", per_decade},
            {"slope", slope},         {"midpoint", midpoint}, {"lexical-strength", lexical_strength},
            {"min-len", min_len},     {"max-len", max_len},   {"shuffle-tokens", shuffle_tokens}};
  }
};

// Shared by train and ablate. Defaults follow the original hyperparameters.
struct TrainOpts {
  std::string corpus;
  std::string out;
  std::string arch = "lstm";
  bool use_year = true;
  std::size_t word_dim = 300;
  std::size_t year_dim = 300;
  std::size_t hidden = 512;
  std::size_t epochs = 1;
  double lr = 0.001;
  std::size_t batch_size = 100;
  std::string optimizer = "adam";
  double clip_norm = 0.0;
  std::size_t max_len = 50;
  double train_fraction = 0.9;
  std::size_t vocab_cap = 600000;
  std::string embeddings;
  double oov_stddev = 0.1;
  std::size_t log_every = 10;

  json to_json(bool with_model_choice) const {
    json j = {{"corpus", corpus}};
    if (with_model_choice) {
      j["run-dir"] = out;
      j["arch"] = arch;
      j["use-year"] = use_year;
    } else {
      j["out-dir"] = out;
    }
    j["word-dim"] = word_dim;
    j["year-dim"] = year_dim;
    j["hidden"] = hidden;
    j["epochs"] = epochs;
    j["lr"] = lr;
    j["batch-size"] = batch_size;
    j["optimizer"] = optimizer;
    j["clip-norm"] = clip_norm;
    j["max-len"] = max_len;
    j["train-fraction"] = train_fraction;
    j["vocab-cap"] = vocab_cap;
    j["embeddings"] = embeddings;
    j["oov-stddev"] = oov_stddev;
    j["log-every"] = log_every;
    return j;
  }
};

struct PcaOpts {
  std::string model;
  std::string compare;
  std::string out;

  json to_json() const { return {{"model", model}, {"compare", compare}, {"out-dir", out}}; }
};

struct DateOpts {
  std::string model;
  std::string corpus;
  std::string out;
  std::string bucket = "decade";
  double frac = 0.25;
  std::size_t robust_iterations = 2;
  bool baseline = false;
  int baseline_year = 0;  // 0: midpoint of the year range
  std::string error_report;
  std::size_t top_k = 10;
  std::size_t min_length = 5;

  json to_json() const {
    return {{"model", model},           {"corpus", corpus},     {"out-dir", out},
            {"bucket", bucket},         {"frac", frac},         {"robust-iterations", robust_iterations},
            {"baseline", baseline},     {"baseline-year", baseline_year}, {"error-report", error_report},
            {"top-k", top_k},           {"min-length", min_length}};
  }
};

struct EvalOpts {
  std::string model;
  std::string corpus;
  std::string out;

  json to_json() const { return {{"model", model}, {"corpus", corpus}, {"out-dir", out}}; }
};

struct GradOpts {
  std::string arch = "all";
  bool use_year = true;
  std::size_t word_dim = 8;
  std::size_t year_dim = 4;
  std::size_t hidden = 16;
  std::size_t tags = 5;
  std::size_t length = 6;
  std::size_t vocab = 20;
  double tolerance = 1e-4;
  std::string out = "grad_check";

  json to_json() const {
    return {{"arch", arch},     {"use-year", use_year}, {"word-dim", word_dim}, {"year-dim", year_dim},
            {"hidden", hidden}, {"tags", tags},         {"length", length},     {"vocab", vocab},
            {"tolerance", tolerance}, {"out-dir", out}};
  }
};

// ------------------------------------------------------------------ helpers

class Manifest {
 public:
  Manifest(std::string subcommand, std::vector<std::string> argv, const GlobalOpts& g)
      : start_(std::chrono::steady_clock::now()) {
    j_["tool"] = "chronotag";
    j_["version"] = "0.1.0";
    j_["subcommand"] = std::move(subcommand);
    j_["argv"] = std::move(argv);
    j_["seed"] = g.seed;
    j_["threads"] = g.threads;
    j_["config"] = g.to_json();
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }

  void set_config(const json& sub) { j_["config"][j_["subcommand"].get<std::string>()] = sub; }
  void input(const std::string& role, const fs::path& p) {
    j_["inputs"][role] = {{"path", p.string()}, {"fnv1a64", file_digest(p)}};
  }
  void output(const fs::path& p) { j_["outputs"][p.string()] = file_digest(p); }
  json& extra() { return j_["results"]; }

  void write(const fs::path& dir) {
    j_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    fs::create_directories(dir);
    write_file_atomic(dir / "run_manifest.json", j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

void write_output(Manifest& m, const fs::path& p, std::string_view content) {
  write_file_atomic(p, content);
  m.output(p);
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw InvalidArgument("unknown optimizer '" + s + "' (expected adam or sgd)");
}

struct LoadedRun {
  fs::path dir;
  fs::path checkpoint;
  Checkpoint model;
};

LoadedRun load_run(const std::string& where) {
  LoadedRun r;
  const fs::path p(where);
  if (fs::is_directory(p)) {
    r.dir = p;
    r.checkpoint = p / "model.ckpt";
  } else {
    r.dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
    r.checkpoint = p;
  }
  if (!fs::exists(r.checkpoint)) throw DataError("no checkpoint at " + r.checkpoint.string());
  r.model = load_checkpoint(r.checkpoint);
  return r;
}

std::vector<EncodedSentence> encode_corpus(const LoadedRun& run, const fs::path& corpus) {
  const auto vocab = Vocabulary::load(run.dir / "vocab.tsv");
  const auto tags = TagSet::load(run.dir / "tags.tsv");
  if (vocab.size() != run.model.params.words->vectors.rows()) {
    throw DataError("vocab.tsv does not match the checkpoint's word table");
  }
  auto sentences = truncate(load_corpus(corpus, run.model.params.years.range), run.model.config.max_len);
  return encode_all(sentences, vocab, tags);
}

fs::path default_corpus(const LoadedRun& run, const std::string& given) {
  return given.empty() ? run.dir / "test.jsonl" : fs::path(given);
}

std::string fmt(double v) { return format_number(v); }

// ------------------------------------------------------------ subcommands

int cmd_synth(const GlobalOpts& g, const SynthOpts& o, Manifest& m, std::ostream& out) {
  SynthConfig c;
  c.years = g.years();
  c.per_decade = o.per_decade;
  c.mode = parse_drift_mode(o.mode);
  c.slope = o.slope;
  c.midpoint = o.midpoint;
  c.lexical_strength = o.lexical_strength;
  c.min_len = o.min_len;
  c.max_len = o.max_len;
  c.seed = g.seed;
  c.threads = g.threads;
  auto corpus = generate(c);
  if (o.shuffle_tokens) {
    Rng r = Rng(g.seed).fork("shuffle_tokens");
    corpus = shuffle_tokens(std::move(corpus), r);
  }

  const fs::path path(o.output);
  const fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  fs::create_directories(dir);
  std::ostringstream text;
  write_corpus(text, corpus);
  write_output(m, path, text.str());
  auto manifest = synth_manifest(c, corpus.size());
  manifest["shuffle_tokens"] = o.shuffle_tokens;
  write_output(m, dir / "manifest.json", manifest.dump(2) + "\n");

  const auto inv = verify_frequency_invariance(corpus);
  m.extra() = {{"sentences", corpus.size()}, {"max_decade_tv", inv.max_distance}};
  out << "sentences " << corpus.size() << "\n";
  out << "max_decade_tv " << fmt(inv.max_distance) << (inv.passed ? " (invariant)" : " (drifting)") << "\n";
  m.write(dir);
  return kOk;
}

DataOptions data_options(const GlobalOpts& g, const TrainOpts& o) {
  DataOptions d;
  d.years = g.years();
  d.train_fraction = o.train_fraction;
  d.max_len = o.max_len;
  d.vocab_cap = o.vocab_cap;
  d.word_dim = o.word_dim;
  if (!o.embeddings.empty()) d.embeddings = o.embeddings;
  d.oov_stddev = o.oov_stddev;
  d.seed = g.seed;
  return d;
}

TrainConfig train_config(const GlobalOpts& g, const TrainOpts& o) {
  TrainConfig t;
  t.batch_size = o.batch_size;
  t.learning_rate = o.lr;
  t.epochs = o.epochs;
  t.seed = g.seed;
  t.optimizer = parse_optimizer(o.optimizer);
  t.clip_norm = o.clip_norm;
  t.threads = g.threads;
  t.log_every = o.log_every;
  return t;
}

ModelConfig model_config(const TrainOpts& o, Architecture arch, bool use_year) {
  ModelConfig c;
  c.architecture = arch;
  c.use_year = use_year;
  c.word_dim = o.word_dim;
  c.year_dim = o.year_dim;
  c.hidden = o.hidden;
  c.max_len = o.max_len;
  return c;
}

ExperimentData load_data(const GlobalOpts& g, const TrainOpts& o, Manifest& m, std::ostream& err) {
  m.input("corpus", o.corpus);
  if (!o.embeddings.empty()) m.input("embeddings", o.embeddings);
  auto data = prepare_data(load_corpus(o.corpus, g.years()), data_options(g, o));
  for (const auto& w : data.warnings) err << "warning: " << w << "\n";
  return data;
}

// Writes everything a later pca/date/eval needs into `dir`.
TrainedModel train_into(const fs::path& dir, const GlobalOpts& g, const TrainOpts& o, const ExperimentData& data,
                        Architecture arch, bool use_year, Manifest& m, std::ostream& out) {
  fs::create_directories(dir);
  const auto tc = train_config(g, o);
  std::string log = "step,mean_loss\n";
  out << "step,mean_loss\n";
  auto progress = [&](const LossPoint& p) {
    const auto line = std::to_string(p.step) + "," + fmt(p.mean_loss) + "\n";
    log += line;
    out << line << std::flush;
  };
  auto trained = train_model(data, model_config(o, arch, use_year), g.years(), tc, progress);

  save_checkpoint(dir / "model.ckpt", trained.config, trained.params);
  m.output(dir / "model.ckpt");
  data.vocab.save(dir / "vocab.tsv");
  m.output(dir / "vocab.tsv");
  data.tags.save(dir / "tags.tsv");
  m.output(dir / "tags.tsv");
  std::ostringstream test;
  write_corpus(test, data.split.test);
  write_output(m, dir / "test.jsonl", test.str());
  write_output(m, dir / "train_log.csv", log);

  json config = o.to_json(true);
  config["arch"] = std::string(to_string(arch));
  config["use-year"] = use_year;
  config["seed"] = g.seed;
  config["tag_count"] = trained.config.tag_count;
  config["vocab_size"] = data.vocab.size();
  write_output(m, dir / "config.json", config.dump(2) + "\n");

  const auto& r = trained.report;
  json report = {{"initial_train_accuracy", r.initial_train_accuracy},
                 {"final_train_accuracy", r.final_train_accuracy},
                 {"final_test_accuracy", r.final_test_accuracy},
                 {"steps", r.steps},
                 {"sentences_seen", r.sentences_seen}};
  write_output(m, dir / "train_report.json", report.dump(2) + "\n");
  return trained;
}

int cmd_train(const GlobalOpts& g, const TrainOpts& o, Manifest& m, std::ostream& out, std::ostream& err) {
  const auto arch = parse_architecture(o.arch);
  const auto data = load_data(g, o, m, err);
  const auto t = train_into(o.out, g, o, data, arch, o.use_year, m, out);
  out << "initial_train_accuracy " << fmt(t.report.initial_train_accuracy) << "\n";
  out << "train_accuracy " << fmt(t.report.final_train_accuracy) << "\n";
  out << "test_accuracy " << fmt(t.report.final_test_accuracy) << "\n";
  m.extra() = {{"train_accuracy", t.report.final_train_accuracy}, {"test_accuracy", t.report.final_test_accuracy}};
  m.write(o.out);
  return kOk;
}

int cmd_ablate(const GlobalOpts& g, const TrainOpts& o, Manifest& m, std::ostream& out, std::ostream& err) {
  const auto data = load_data(g, o, m, err);
  const fs::path dir(o.out);
  std::vector<AblationRow> rows;
  for (auto arch : {Architecture::lstm, Architecture::feedforward}) {
    for (bool use_year : {true, false}) {
      const std::string name = std::string(to_string(arch)) + (use_year ? "_year" : "_noyear");
      err << "training " << name << "\n";
      std::ostringstream progress;
      const auto t = train_into(dir / name, g, o, data, arch, use_year, m, progress);
      rows.push_back({std::string(to_string(arch)), use_year, t.report.final_train_accuracy,
                      t.report.final_test_accuracy});
    }
  }
  const auto csv = ablation_csv(rows);
  write_output(m, dir / "ablation.csv", csv);
  out << csv;
  json res = json::array();
  for (const auto& r : rows) {
    res.push_back({{"architecture", r.architecture}, {"use_year", r.use_year}, {"test_accuracy", r.test_accuracy}});
  }
  m.extra() = res;
  m.write(dir);
  return kOk;
}

EmbeddingProjection project(const LoadedRun& run) {
  if (!run.model.config.use_year) throw DataError("model has no year table: " + run.checkpoint.string());
  return pca_first_component(run.model.params.years);
}

int cmd_pca(const PcaOpts& o, Manifest& m, std::ostream& out) {
  const auto run = load_run(o.model);
  m.input("model", run.checkpoint);
  const auto p = project(run);
  std::optional<LoadedRun> other;
  std::optional<EmbeddingProjection> q;
  if (!o.compare.empty()) {
    other = load_run(o.compare);
    m.input("compare", other->checkpoint);
    q = project(*other);
  }

  const fs::path dir = o.out.empty() ? run.dir / "pca" : fs::path(o.out);
  fs::create_directories(dir);
  write_output(m, dir / "pca.csv", pca_csv(p));
  write_output(m, dir / "pca.svg", render_svg(pca_plot(p, "PC1 of year embeddings")));
  out << "r2 " << fmt(p.fit.r_squared) << "\n";
  out << "explained_variance_ratio " << fmt(p.explained_variance_ratio) << "\n";
  m.extra() = {{"r2", p.fit.r_squared}, {"explained_variance_ratio", p.explained_variance_ratio}};
  if (q) {
    write_output(m, dir / "pca_compare.csv", pca_csv(*q));
    write_output(m, dir / "pca_compare.svg", render_svg(pca_plot(*q, "PC1 of year embeddings (comparison)")));
    out << "r2_compare " << fmt(q->fit.r_squared) << "\n";
    out << "r2_difference " << fmt(p.fit.r_squared - q->fit.r_squared) << "\n";
    m.extra()["r2_compare"] = q->fit.r_squared;
  }
  m.write(dir);
  return kOk;
}

int cmd_date(const GlobalOpts& g, const DateOpts& o, Manifest& m, std::ostream& out, std::ostream& err) {
  const auto kind = parse_bucket_kind(o.bucket);
  if (o.baseline) {
    const auto range = g.years();
    const int year = o.baseline_year != 0 ? o.baseline_year : default_baseline_year(range);
    out << "baseline " << fmt(baseline_metric(range, kind, year)) << "\n";
    return kOk;
  }
  if (o.model.empty()) throw InvalidArgument("date needs --model (or --baseline)");

  const auto run = load_run(o.model);
  m.input("model", run.checkpoint);
  const auto corpus_path = default_corpus(run, o.corpus);
  m.input("corpus", corpus_path);
  const auto sentences = encode_corpus(run, corpus_path);
  const auto range = run.model.params.years.range;
  if (!run.model.config.use_year) {
    err << "warning: model has no year embeddings; its perplexity is constant in year and every prediction is "
           "the earliest year\n";
  }

  const LowessOptions lw{o.frac, o.robust_iterations};
  const auto table = perplexity_table(run.model.params, run.model.config, sentences, range, g.threads);
  const auto curves = bucket_curves(table, make_buckets(sentences, kind), range, lw);
  const int base_year = o.baseline_year != 0 ? o.baseline_year : default_baseline_year(range);
  const auto report = dating_metric(curves, kind, base_year);

  const fs::path dir = o.out.empty() ? run.dir / ("date_" + o.bucket) : fs::path(o.out);
  fs::create_directories(dir);
  for (const auto& c : curves) {
    write_output(m, dir / ("curve_" + c.label + ".csv"), curve_csv(c));
    write_output(m, dir / ("curve_" + c.label + ".svg"), render_svg(curve_plot(c)));
  }
  write_output(m, dir / "dating_report.csv", dating_csv(report));
  write_output(m, dir / "dating.svg", render_svg(dating_plot(report)));

  if (!o.error_report.empty()) {
    const auto ff = load_run(o.error_report);
    m.input("compare", ff.checkpoint);
    SentenceReportOptions so;
    so.top_k = o.top_k;
    so.min_length = o.min_length;
    so.lowess = lw;
    so.threads = g.threads;
    const auto rows = per_sentence_error_report({&run.model.params, &run.model.config},
                                                {&ff.model.params, &ff.model.config}, sentences, range, so);
    const auto raw = load_corpus(corpus_path, range);
    std::string csv = "rank,index,year,model_predicted,model_error,compare_predicted,compare_error,sentence\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      std::string text;
      for (const auto& t : raw[r.index].tokens) text += (text.empty() ? "" : " ") + t;
      json quoted = text;
      csv += std::to_string(i + 1) + "," + std::to_string(r.index) + "," + std::to_string(r.year) + "," +
             std::to_string(r.lstm_predicted) + "," + std::to_string(r.lstm_error) + "," +
             std::to_string(r.ff_predicted) + "," + std::to_string(r.ff_error) + "," + quoted.dump() + "\n";
    }
    write_output(m, dir / "sentence_report.csv", csv);
  }

  out << "buckets " << report.rows.size() << "\n";
  out << "mean_abs_error " << fmt(report.mean_abs_error) << "\n";
  out << "baseline " << fmt(report.baseline) << "\n";
  m.extra() = {{"bucket", o.bucket}, {"mean_abs_error", report.mean_abs_error}, {"baseline", report.baseline}};
  m.write(dir);
  return kOk;
}

int cmd_eval(const GlobalOpts& g, const EvalOpts& o, Manifest& m, std::ostream& out) {
  const auto run = load_run(o.model);
  m.input("model", run.checkpoint);
  const auto corpus_path = default_corpus(run, o.corpus);
  m.input("corpus", corpus_path);
  const auto sentences = encode_corpus(run, corpus_path);
  const double acc = evaluate_accuracy(run.model.params, run.model.config, sentences, g.threads);
  out << "sentences " << sentences.size() << "\n";
  out << "accuracy " << fmt(acc) << "\n";
  const fs::path dir = o.out.empty() ? run.dir / "eval" : fs::path(o.out);
  m.extra() = {{"accuracy", acc}, {"sentences", sentences.size()}};
  m.write(dir);
  return kOk;
}

int cmd_grad_check(const GlobalOpts& g, const GradOpts& o, Manifest& m, std::ostream& out) {
  std::vector<std::pair<Architecture, bool>> variants;
  if (o.arch == "all") {
    variants = {{Architecture::lstm, true},
                {Architecture::lstm, false},
                {Architecture::feedforward, true},
                {Architecture::feedforward, false}};
  } else {
    variants = {{parse_architecture(o.arch), o.use_year}};
  }
  GradCheckSetup setup;
  setup.length = o.length;
  setup.vocab_size = o.vocab;
  bool ok = true;
  std::string csv = "variant,group,checked,max_rel_error\n";
  json res = json::object();
  for (const auto& [arch, use_year] : variants) {
    ModelConfig c;
    c.architecture = arch;
    c.use_year = use_year;
    c.word_dim = o.word_dim;
    c.year_dim = o.year_dim;
    c.hidden = o.hidden;
    c.tag_count = o.tags;
    c.max_len = o.length;
    const auto report = grad_check(c, g.seed, setup);
    const std::string name = std::string(to_string(arch)) + (use_year ? "+year" : "-year");
    for (const auto& grp : report.groups) {
      csv += name + "," + grp.group + "," + std::to_string(grp.checked) + "," + fmt(grp.max_rel_error) + "\n";
    }
    const bool pass = report.passed(o.tolerance);
    ok = ok && pass;
    res[name] = report.max_rel_error();
    out << name << " max_rel_error " << fmt(report.max_rel_error()) << (pass ? " ok" : " FAILED") << "\n";
  }
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_output(m, dir / "grad_check.csv", csv);
  m.extra() = res;
  m.write(dir);
  return ok ? kOk : kNumericalFailure;
}

void add_train_options(CLI::App* sub, TrainOpts& o, bool model_choice) {
  sub->add_option("--corpus", o.corpus, "Corpus in JSON-lines format")->required();
  if (model_choice) {
    sub->add_option("--run-dir,-o", o.out, "Directory for the checkpoint and reports")->required();
    sub->add_option("--arch", o.arch, "lstm or ff")->check(CLI::IsMember({"lstm", "ff", "feedforward"}));
    sub->add_flag("--use-year,!--no-year", o.use_year, "Concatenate a trainable year embedding");
  } else {
    sub->add_option("--out-dir,-o", o.out, "Directory for the four runs and ablation.csv")->required();
  }
  sub->add_option("--word-dim", o.word_dim, "Word embedding width");
  sub->add_option("--year-dim", o.year_dim, "Year embedding width");
  sub->add_option("--hidden", o.hidden, "Hidden units");
  sub->add_option("--epochs", o.epochs);
  sub->add_option("--lr", o.lr, "Learning rate");
  sub->add_option("--batch-size", o.batch_size);
  sub->add_option("--optimizer", o.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  sub->add_option("--clip-norm", o.clip_norm, "Global gradient norm cap, 0 disables");
  sub->add_option("--max-len", o.max_len, "Truncate sentences to this many tokens");
  sub->add_option("--train-fraction", o.train_fraction);
  sub->add_option("--vocab-cap", o.vocab_cap, "Keep this many most frequent training words");
  sub->add_option("--embeddings", o.embeddings, "word2vec text file; missing words are drawn at random");
  sub->add_option("--oov-stddev", o.oov_stddev, "Spread of random word vectors");
  sub->add_option("--log-every", o.log_every, "Batches per progress line");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diachronic part-of-speech taggers and sentence dating", "chronotag"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file of option values (flags override it)");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Master seed")->envname("CHRONOTAG_SEED");
  app.add_option("--threads", g.threads, "Worker threads; 1 is bitwise reproducible")->check(CLI::PositiveNumber);
  app.add_option("--year-min", g.year_min, "First year of the range");
  app.add_option("--year-max", g.year_max, "Last year of the range");

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dated, tagged corpus");
  synth->add_option("--output,-o", so.output, "Corpus path")->required();
  synth->add_option("--mode", so.mode, "none, lexical, syntactic or mixed")
      ->check(CLI::IsMember({"none", "lexical", "syntactic", "mixed"}));
  synth->add_option("--per-decade", so.per_decade);
  synth->add_option("--slope", so.slope, "Logistic scale of the word-order change, years");
  synth->add_option("--midpoint", so.midpoint, "Year at which both orders are equally likely");
  synth->add_option("--lexical-strength", so.lexical_strength);
  synth->add_option("--min-len", so.min_len);
  synth->add_option("--max-len", so.max_len);
  synth->add_flag("--shuffle-tokens", so.shuffle_tokens, "Permute every sentence's tokens");

  TrainOpts to;
  auto* train_cmd = app.add_subcommand("train", "Train one tagger");
  add_train_options(train_cmd, to, true);

  TrainOpts ao;
  auto* ablate = app.add_subcommand("ablate", "Train all four variants with identical settings");
  add_train_options(ablate, ao, false);

  PcaOpts po;
  auto* pca = app.add_subcommand("pca", "First principal component of a model's year embeddings");
  pca->add_option("--model", po.model, "Run directory or checkpoint")->required();
  pca->add_option("--compare", po.compare, "Second run to compare against");
  pca->add_option("--out-dir,-o", po.out, "Output directory (default: <run>/pca)");

  DateOpts dopt;
  auto* date = app.add_subcommand("date", "Date bucketed sentences by perplexity sweep");
  date->add_option("--model", dopt.model, "Run directory or checkpoint");
  date->add_option("--corpus", dopt.corpus, "Sentences to date (default: the run's test split)");
  date->add_option("--out-dir,-o", dopt.out, "Output directory (default: <run>/date_<bucket>)");
  date->add_option("--bucket", dopt.bucket, "decade or year")->check(CLI::IsMember({"decade", "year"}));
  date->add_option("--frac", dopt.frac, "LOWESS span");
  date->add_option("--robust-iterations", dopt.robust_iterations, "LOWESS robustifying passes");
  date->add_flag("--baseline", dopt.baseline, "Print the constant-prediction metric and exit");
  date->add_option("--baseline-year", dopt.baseline_year, "Constant prediction (default: middle of the range)");
  date->add_option("--error-report", dopt.error_report, "Second run; writes per-sentence errors of both");
  date->add_option("--top-k", dopt.top_k, "Sentences listed in the error report");
  date->add_option("--min-length", dopt.min_length, "Report only sentences longer than this");

  EvalOpts eo;
  auto* eval = app.add_subcommand("eval", "Token accuracy of a trained model");
  eval->add_option("--model", eo.model, "Run directory or checkpoint")->required();
  eval->add_option("--corpus", eo.corpus, "Sentences (default: the run's test split)");
  eval->add_option("--out-dir,-o", eo.out, "Output directory (default: <run>/eval)");

  GradOpts go;
  auto* grad = app.add_subcommand("grad-check", "Compare analytic gradients with finite differences");
  grad->add_option("--arch", go.arch, "lstm, ff or all")->check(CLI::IsMember({"lstm", "ff", "feedforward", "all"}));
  grad->add_flag("--use-year,!--no-year", go.use_year, "Include a year embedding");
  grad->add_option("--word-dim", go.word_dim, "Word embedding size");
  grad->add_option("--year-dim", go.year_dim, "Year embedding size");
  grad->add_option("--hidden", go.hidden, "Hidden layer size");
  grad->add_option("--tags", go.tags, "Tagset size");
  grad->add_option("--length", go.length, "Sentence length");
  grad->add_option("--vocab", go.vocab, "Vocabulary size");
  grad->add_option("--tolerance", go.tolerance, "Largest allowed relative error");
  grad->add_option("--out-dir,-o", go.out, "Output directory (default: ./grad_check)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  auto* sub = app.get_subcommands().front();
  Manifest m(sub->get_name(), args, g);
  try {
    if (sub == synth) {
      m.set_config(so.to_json());
      return cmd_synth(g, so, m, out);
    }
    if (sub == train_cmd) {
      m.set_config(to.to_json(true));
      return cmd_train(g, to, m, out, err);
    }
    if (sub == ablate) {
      m.set_config(ao.to_json(false));
      return cmd_ablate(g, ao, m, out, err);
    }
    if (sub == pca) {
      m.set_config(po.to_json());
      return cmd_pca(po, m, out);
    }
    if (sub == date) {
      m.set_config(dopt.to_json());
      return cmd_date(g, dopt, m, out, err);
    }
    if (sub == eval) {
      m.set_config(eo.to_json());
      return cmd_eval(g, eo, m, out);
    }
    m.set_config(go.to_json());
    return cmd_grad_check(g, go, m, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    // DataError, DegenerateInput, filesystem errors.
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace chronotag::cli
