#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronotag/analysis.hpp"

namespace chronotag {

// Shortest round-trippable-enough text for reports: printf "%.10g".
std::string format_number(double value);

// Writes `path.tmp` then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// FNV-1a 64 of the bytes, as 16 lowercase hex digits.
std::string digest_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

std::string pca_csv(const EmbeddingProjection& projection);        // year,pc1_score
std::string curve_csv(const PerplexityCurve& curve);               // year,raw_mean_ppl,lowess
std::string dating_csv(const DatingReport& report);                // bucket,center,predicted,abs_error

struct AblationRow {
  std::string architecture;
  bool use_year = false;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

std::string ablation_csv(std::span<const AblationRow> rows);  // architecture,use_year,train_accuracy,test_accuracy

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool points = false;  // markers instead of a polyline
  std::string color = "#1f77b4";
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  int width = 640;
  int height = 400;
};

// Self-contained SVG; identical input gives identical bytes.
std::string render_svg(const PlotSpec& spec);

PlotSpec pca_plot(const EmbeddingProjection& projection, std::string_view title);
PlotSpec curve_plot(const PerplexityCurve& curve);
PlotSpec dating_plot(const DatingReport& report);

}  // namespace chronotag
