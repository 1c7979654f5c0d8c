#include "chronotag/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "chronotag/errors.hpp"
#include "chronotag/rng.hpp"

namespace chronotag {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("error writing " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string digest_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) { return digest_hex(read_file(path)); }

std::string pca_csv(const EmbeddingProjection& p) {
  std::string out = "year,pc1_score\n";
  for (std::size_t i = 0; i < p.years.size(); ++i) {
    out += std::to_string(p.years[i]) + "," + format_number(p.scores[i]) + "\n";
  }
  return out;
}

std::string curve_csv(const PerplexityCurve& c) {
  std::string out = "year,raw_mean_ppl,lowess\n";
  for (std::size_t i = 0; i < c.years.size(); ++i) {
    out += std::to_string(c.years[i]) + "," + format_number(c.raw[i]) + "," + format_number(c.smoothed[i]) + "\n";
  }
  return out;
}

std::string dating_csv(const DatingReport& r) {
  std::string out = "bucket,center,predicted,abs_error\n";
  for (const auto& row : r.rows) {
    out += row.label + "," + std::to_string(row.center) + "," + std::to_string(row.predicted) + "," +
           std::to_string(row.abs_error) + "\n";
  }
  return out;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "architecture,use_year,train_accuracy,test_accuracy\n";
  for (const auto& r : rows) {
    out += r.architecture + "," + (r.use_year ? "true" : "false") + "," + format_number(r.train_accuracy) + "," +
           format_number(r.test_accuracy) + "\n";
  }
  return out;
}

// ------------------------------------------------------------------- SVG

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (lo > hi) {
      lo = 0.0;
      hi = 1.0;
    } else if (lo == hi) {
      const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

// Heckbert's nice numbers.
double nice(double x, bool round) {
  const double e = std::floor(std::log10(x));
  const double f = x / std::pow(10.0, e);
  double nf;
  if (round) nf = f < 1.5 ? 1 : f < 3 ? 2 : f < 7 ? 5 : 10;
  else nf = f <= 1 ? 1 : f <= 2 ? 2 : f <= 5 ? 5 : 10;
  return nf * std::pow(10.0, e);
}

std::vector<double> ticks(Range& r, int target = 6) {
  const double step = nice(nice(r.hi - r.lo, false) / (target - 1), true);
  r.lo = std::floor(r.lo / step) * step;
  r.hi = std::ceil(r.hi / step) * step;
  std::vector<double> out;
  for (double t = r.lo; t <= r.hi + step * 0.5; t += step) out.push_back(t);
  return out;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  const double left = 70, right = 20, top = 40, bottom = 55;
  const double w = spec.width, h = spec.height;
  const double pw = w - left - right, ph = h - top - bottom;

  Range xr, yr;
  for (const auto& s : spec.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.settle();
  yr.settle();
  const auto xt = ticks(xr);
  const auto yt = ticks(yr);
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fixed(w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(spec.title)
    << "</text>\n";

  for (double t : xt) {
    const auto x = fixed(px(t));
    o << "<line x1=\"" << x << "\" y1=\"" << fixed(top) << "\" x2=\"" << x << "\" y2=\"" << fixed(top + ph)
      << "\" stroke=\"#e5e5e5\"/>\n";
    o << "<text x=\"" << x << "\" y=\"" << fixed(top + ph + 16) << "\" text-anchor=\"middle\">" << tick_label(t)
      << "</text>\n";
  }
  for (double t : yt) {
    const auto y = fixed(py(t));
    o << "<line x1=\"" << fixed(left) << "\" y1=\"" << y << "\" x2=\"" << fixed(left + pw) << "\" y2=\"" << y
      << "\" stroke=\"#e5e5e5\"/>\n";
    o << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(t) + 4) << "\" text-anchor=\"end\">"
      << tick_label(t) << "</text>\n";
  }
  o << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(pw) << "\" height=\""
    << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(h - 12) << "\" text-anchor=\"middle\">"
    << escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(16 " << fixed(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(spec.y_label) << "</text>\n";

  double legend_y = top + 14;
  for (const auto& s : spec.series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.points) {
      o << "<g fill=\"" << escape(s.color) << "\">\n";
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        o << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i])) << "\" r=\"2.5\"/>\n";
      }
      o << "</g>\n";
    } else {
      // Break the line at non-finite values.
      std::string pts;
      auto flush = [&] {
        if (!pts.empty()) {
          o << "<polyline fill=\"none\" stroke=\"" << escape(s.color) << "\" stroke-width=\"1.5\" points=\"" << pts
            << "\"/>\n";
        }
        pts.clear();
      };
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
          flush();
          continue;
        }
        if (!pts.empty()) pts += ' ';
        pts += fixed(px(s.x[i])) + "," + fixed(py(s.y[i]));
      }
      flush();
    }
    if (!s.name.empty()) {
      o << "<rect x=\"" << fixed(left + pw - 150) << "\" y=\"" << fixed(legend_y - 8) << "\" width=\"10\" height=\"10\" fill=\""
        << escape(s.color) << "\"/>\n";
      o << "<text x=\"" << fixed(left + pw - 135) << "\" y=\"" << fixed(legend_y + 1) << "\">" << escape(s.name)
        << "</text>\n";
      legend_y += 16;
    }
  }
  o << "</svg>\n";
  return o.str();
}

PlotSpec pca_plot(const EmbeddingProjection& p, std::string_view title) {
  PlotSpec spec;
  spec.title = std::string(title) + " (R^2 = " + tick_label(p.fit.r_squared) + ")";
  spec.x_label = "year";
  spec.y_label = "PC1 score";
  PlotSeries pts{"year embeddings", {}, p.scores, true, "#1f77b4"};
  pts.x.assign(p.years.begin(), p.years.end());
  spec.series.push_back(std::move(pts));
  if (!p.years.empty()) {
    const double a = p.years.front(), b = p.years.back();
    spec.series.push_back({"linear fit",
                           {a, b},
                           {p.fit.intercept + p.fit.slope * a, p.fit.intercept + p.fit.slope * b},
                           false,
                           "#d62728"});
  }
  return spec;
}

PlotSpec curve_plot(const PerplexityCurve& c) {
  PlotSpec spec;
  spec.title = "bucket " + c.label + ": predicted " + std::to_string(c.predicted_year);
  spec.x_label = "candidate year";
  spec.y_label = "mean tag perplexity";
  std::vector<double> x(c.years.begin(), c.years.end());
  spec.series.push_back({"mean perplexity", x, c.raw, true, "#7f7f7f"});
  spec.series.push_back({"LOWESS", x, c.smoothed, false, "#1f77b4"});
  return spec;
}

PlotSpec dating_plot(const DatingReport& r) {
  PlotSpec spec;
  spec.title = std::string(to_string(r.kind)) + " buckets: mean error " + tick_label(r.mean_abs_error) +
               " (baseline " + tick_label(r.baseline) + ")";
  spec.x_label = "bucket center";
  spec.y_label = "predicted year";
  PlotSeries pts{"prediction", {}, {}, true, "#1f77b4"};
  for (const auto& row : r.rows) {
    pts.x.push_back(row.center);
    pts.y.push_back(row.predicted);
  }
  if (!r.rows.empty()) {
    const auto [lo, hi] = std::minmax_element(pts.x.begin(), pts.x.end());
    spec.series.push_back({"exact", {*lo, *hi}, {*lo, *hi}, false, "#bbbbbb"});
  }
  spec.series.push_back(std::move(pts));
  return spec;
}

}  // namespace chronotag
