#include <memory>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chronotag/analysis.hpp"
#include "chronotag/errors.hpp"
#include "chronotag/model.hpp"
#include "chronotag/pipeline.hpp"
#include "chronotag/synthgen.hpp"
#include "cli.hpp"

namespace py = pybind11;
using namespace chronotag;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v) {
  Array a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

Array to_array(const Matrix& m) {
  Array a({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-d array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

py::dict fit_dict(const LinearFit& f) {
  py::dict d;
  d["slope"] = f.slope;
  d["intercept"] = f.intercept;
  d["r_squared"] = f.r_squared;
  return d;
}

py::dict projection_dict(const EmbeddingProjection& p) {
  py::dict d;
  d["years"] = p.years;
  d["scores"] = to_array(p.scores);
  d["component"] = to_array(p.component);
  d["eigenvalue"] = p.eigenvalue;
  d["explained_variance_ratio"] = p.explained_variance_ratio;
  d["fit"] = fit_dict(p.fit);
  d["r_squared"] = p.fit.r_squared;
  d["iterations"] = p.iterations;
  return d;
}

py::dict report_dict(const DatingReport& r) {
  py::list rows;
  for (const auto& row : r.rows) {
    py::dict d;
    d["bucket"] = row.label;
    d["center"] = row.center;
    d["predicted"] = row.predicted;
    d["abs_error"] = row.abs_error;
    rows.append(d);
  }
  py::dict d;
  d["kind"] = std::string(to_string(r.kind));
  d["rows"] = rows;
  d["mean_abs_error"] = r.mean_abs_error;
  d["baseline"] = r.baseline;
  d["baseline_year"] = r.baseline_year;
  return d;
}

// A trained model together with the data it was trained on.
struct Tagger {
  std::shared_ptr<const ExperimentData> data;
  TrainedModel model;

  YearRange years() const { return model.params.years.range; }

  EncodedSentence encode_one(const DatedSentence& s) const { return encode(s, data->vocab, data->tags); }

  std::vector<EncodedSentence> encode_many(const std::optional<std::vector<DatedSentence>>& sentences) const {
    if (!sentences) return data->test;
    return encode_all(truncate(*sentences, model.config.max_len), data->vocab, data->tags);
  }
};

Tagger train_tagger(const std::vector<DatedSentence>& corpus, const std::string& arch, bool use_year,
                    std::size_t word_dim, std::size_t year_dim, std::size_t hidden, std::size_t epochs, double lr,
                    std::size_t batch_size, double oov_stddev, std::uint64_t seed, std::size_t threads, int year_min,
                    int year_max, double train_fraction, std::size_t max_len) {
  DataOptions o;
  o.years = {year_min, year_max};
  o.word_dim = word_dim;
  o.oov_stddev = oov_stddev;
  o.seed = seed;
  o.train_fraction = train_fraction;
  o.max_len = max_len;
  auto data = std::make_shared<const ExperimentData>(prepare_data(corpus, o));
  ModelConfig c;
  c.architecture = parse_architecture(arch);
  c.use_year = use_year;
  c.year_dim = year_dim;
  c.hidden = hidden;
  c.max_len = max_len;
  TrainConfig t;
  t.epochs = epochs;
  t.learning_rate = lr;
  t.batch_size = batch_size;
  t.seed = seed;
  t.threads = threads;
  auto model = train_model(*data, c, o.years, t);
  return Tagger{std::move(data), std::move(model)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Diachronic part-of-speech taggers, year-embedding PCA and sentence dating";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<DegenerateInput>(m, "DegenerateInput", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError);

  py::class_<DatedSentence>(m, "DatedSentence")
      .def(py::init<>())
      .def(py::init([](int year, std::vector<std::string> tokens, std::vector<std::string> tags) {
             return DatedSentence{year, std::move(tokens), std::move(tags)};
           }),
           py::arg("year"), py::arg("tokens"), py::arg("tags"))
      .def_readwrite("year", &DatedSentence::year)
      .def_readwrite("tokens", &DatedSentence::tokens)
      .def_readwrite("tags", &DatedSentence::tags)
      .def(py::self == py::self)
      .def("__repr__", [](const DatedSentence& s) {
        return "DatedSentence(year=" + std::to_string(s.year) + ", tokens=" + std::to_string(s.tokens.size()) + ")";
      });

  // ---------------------------------------------------------------- corpora

  m.def(
      "generate",
      [](const std::string& mode, std::size_t per_decade, std::uint64_t seed, int year_min, int year_max,
         double slope, double midpoint, double lexical_strength, std::size_t min_len, std::size_t max_len,
         std::size_t threads) {
        SynthConfig c;
        c.mode = parse_drift_mode(mode);
        c.per_decade = per_decade;
        c.seed = seed;
        c.years = {year_min, year_max};
        c.slope = slope;
        c.midpoint = midpoint;
        c.lexical_strength = lexical_strength;
        c.min_len = min_len;
        c.max_len = max_len;
        c.threads = threads;
        py::gil_scoped_release release;
        return generate(c);
      },
      py::arg("mode") = "syntactic", py::arg("per_decade") = 500, py::arg("seed") = 1, py::arg("year_min") = 1810,
      py::arg("year_max") = 2009, py::arg("slope") = 40.0, py::arg("midpoint") = 1910.0,
      py::arg("lexical_strength") = 0.6, py::arg("min_len") = 5, py::arg("max_len") = 20, py::arg("threads") = 1,
      "Synthetic dated, tagged corpus; decades in ascending order.");

  m.def(
      "shuffle_tokens",
      [](std::vector<DatedSentence> corpus, std::uint64_t seed) {
        Rng r(seed);
        return shuffle_tokens(std::move(corpus), r);
      },
      py::arg("corpus"), py::arg("seed"));

  m.def(
      "frequency_invariance",
      [](const std::vector<DatedSentence>& corpus, double threshold) {
        const auto r = verify_frequency_invariance(corpus, threshold);
        py::dict d;
        d["passed"] = r.passed;
        d["max_distance"] = r.max_distance;
        d["decade_a"] = r.decade_a;
        d["decade_b"] = r.decade_b;
        d["decades"] = r.decades;
        return d;
      },
      py::arg("corpus"), py::arg("threshold") = 0.02,
      "Largest pairwise total-variation distance between decade (word, tag) unigrams.");

  m.def(
      "load_corpus",
      [](const std::string& path, int year_min, int year_max) { return load_corpus(path, {year_min, year_max}); },
      py::arg("path"), py::arg("year_min") = 1810, py::arg("year_max") = 2009);
  m.def(
      "save_corpus", [](const std::string& path, const std::vector<DatedSentence>& s) { save_corpus(path, s); },
      py::arg("path"), py::arg("corpus"));

  // --------------------------------------------------------------- analysis

  m.def(
      "lowess",
      [](const Array& x, const Array& y, double frac, std::size_t iterations) {
        return to_array(lowess(to_vector(x), to_vector(y), {frac, iterations}));
      },
      py::arg("x"), py::arg("y"), py::arg("frac") = 0.25, py::arg("iterations") = 2);

  m.def(
      "fit_line", [](const Array& x, const Array& y) { return fit_dict(fit_line(to_vector(x), to_vector(y))); },
      py::arg("x"), py::arg("y"));

  m.def(
      "pca",
      [](const Array& vectors, const std::vector<int>& years) {
        return projection_dict(pca_first_component(to_matrix(vectors), years));
      },
      py::arg("vectors"), py::arg("years"), "First principal component, oriented to rise with year.");

  m.def(
      "dating_metric",
      [](const std::vector<int>& centers, const std::vector<int>& predictions, const std::string& kind,
         int baseline_year) {
        return report_dict(dating_metric(centers, predictions, parse_bucket_kind(kind), baseline_year));
      },
      py::arg("centers"), py::arg("predictions"), py::arg("kind") = "decade", py::arg("baseline_year") = 1910);

  m.def(
      "baseline_metric",
      [](const std::string& kind, int year_min, int year_max, int baseline_year) {
        return baseline_metric({year_min, year_max}, parse_bucket_kind(kind), baseline_year);
      },
      py::arg("kind") = "decade", py::arg("year_min") = 1810, py::arg("year_max") = 2009,
      py::arg("baseline_year") = 1910);

  m.def(
      "grad_check",
      [](const std::string& arch, bool use_year, std::size_t word_dim, std::size_t year_dim, std::size_t hidden,
         std::size_t tags, std::size_t length, std::uint64_t seed) {
        ModelConfig c;
        c.architecture = parse_architecture(arch);
        c.use_year = use_year;
        c.word_dim = word_dim;
        c.year_dim = year_dim;
        c.hidden = hidden;
        c.tag_count = tags;
        c.max_len = length;
        GradCheckSetup setup;
        setup.length = length;
        const auto r = grad_check(c, seed, setup);
        py::dict groups;
        for (const auto& g : r.groups) groups[py::str(g.group)] = g.max_rel_error;
        py::dict d;
        d["max_rel_error"] = r.max_rel_error();
        d["groups"] = groups;
        return d;
      },
      py::arg("arch") = "lstm", py::arg("use_year") = true, py::arg("word_dim") = 8, py::arg("year_dim") = 4,
      py::arg("hidden") = 16, py::arg("tags") = 5, py::arg("length") = 6, py::arg("seed") = 1);

  // ----------------------------------------------------------------- models

  py::class_<Tagger>(m, "Tagger")
      .def_property_readonly("architecture",
                             [](const Tagger& t) { return std::string(to_string(t.model.config.architecture)); })
      .def_property_readonly("use_year", [](const Tagger& t) { return t.model.config.use_year; })
      .def_property_readonly("train_accuracy", [](const Tagger& t) { return t.model.report.final_train_accuracy; })
      .def_property_readonly("test_accuracy", [](const Tagger& t) { return t.model.report.final_test_accuracy; })
      .def_property_readonly("losses",
                             [](const Tagger& t) {
                               std::vector<std::pair<std::size_t, double>> out;
                               for (const auto& p : t.model.report.losses) out.emplace_back(p.step, p.mean_loss);
                               return out;
                             })
      .def_property_readonly("test_sentences", [](const Tagger& t) { return t.data->split.test; })
      .def_property_readonly("year_embeddings", [](const Tagger& t) { return to_array(t.model.params.years.vectors); })
      .def(
          "accuracy",
          [](const Tagger& t, const std::optional<std::vector<DatedSentence>>& sentences, std::size_t threads) {
            const auto enc = t.encode_many(sentences);
            py::gil_scoped_release release;
            return evaluate_accuracy(t.model.params, t.model.config, enc, threads);
          },
          py::arg("sentences") = py::none(), py::arg("threads") = 1)
      .def("pca",
           [](const Tagger& t) {
             if (!t.model.config.use_year) throw DataError("model has no year table");
             return projection_dict(pca_first_component(t.model.params.years));
           })
      .def(
          "perplexity",
          [](const Tagger& t, const DatedSentence& s, int year) {
            return sentence_perplexity(t.model.params, t.model.config, t.encode_one(s), year);
          },
          py::arg("sentence"), py::arg("year"))
      .def(
          "perplexity_table",
          [](const Tagger& t, const std::optional<std::vector<DatedSentence>>& sentences, std::size_t threads) {
            const auto enc = t.encode_many(sentences);
            Matrix table;
            {
              py::gil_scoped_release release;
              table = perplexity_table(t.model.params, t.model.config, enc, t.years(), threads);
            }
            return to_array(table);
          },
          py::arg("sentences") = py::none(), py::arg("threads") = 1,
          "Sentence x candidate-year perplexities; the test split by default.")
      .def(
          "date",
          [](const Tagger& t, const std::string& kind, const std::optional<std::vector<DatedSentence>>& sentences,
             double frac, std::size_t iterations, std::size_t threads) {
            const auto k = parse_bucket_kind(kind);
            const auto enc = t.encode_many(sentences);
            DatingReport r;
            {
              py::gil_scoped_release release;
              const auto table = perplexity_table(t.model.params, t.model.config, enc, t.years(), threads);
              const auto curves = bucket_curves(table, make_buckets(enc, k), t.years(), {frac, iterations});
              r = dating_metric(curves, k, default_baseline_year(t.years()));
            }
            return report_dict(r);
          },
          py::arg("kind") = "decade", py::arg("sentences") = py::none(), py::arg("frac") = 0.25,
          py::arg("iterations") = 2, py::arg("threads") = 1)
      .def(
          "save_checkpoint",
          [](const Tagger& t, const std::string& path) { save_checkpoint(path, t.model.config, t.model.params); },
          py::arg("path"));

  m.def("train", &train_tagger, py::call_guard<py::gil_scoped_release>(), py::arg("corpus"),
        py::arg("arch") = "lstm", py::arg("use_year") = true, py::arg("word_dim") = 32, py::arg("year_dim") = 16,
        py::arg("hidden") = 32, py::arg("epochs") = 10, py::arg("lr") = 0.005, py::arg("batch_size") = 100,
        py::arg("oov_stddev") = 1.0, py::arg("seed") = 1, py::arg("threads") = 1, py::arg("year_min") = 1810,
        py::arg("year_max") = 2009, py::arg("train_fraction") = 0.9, py::arg("max_len") = 50,
        "Split, build vocabulary, and train one tagger.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a chronotag subcommand in-process; returns (exit_code, stdout, stderr).");
}
