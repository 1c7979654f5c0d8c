#include "chronotag/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "chronotag/errors.hpp"

namespace chronotag {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidArgument("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Matrix::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void gemv_add(const Matrix& w, std::span<const double> x, std::span<double> out) {
  if (x.size() != w.cols() || out.size() != w.rows()) throw InvalidArgument("gemv_add: shape mismatch");
  for (std::size_t r = 0; r < w.rows(); ++r) out[r] += dot(w.row(r), x);
}

void gemv_transposed_add(const Matrix& w, std::span<const double> y, std::span<double> out) {
  if (y.size() != w.rows() || out.size() != w.cols()) {
    throw InvalidArgument("gemv_transposed_add: shape mismatch");
  }
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    const auto wr = w.row(r);
    for (std::size_t c = 0; c < wr.size(); ++c) out[c] += yr * wr[c];
  }
}

void outer_add(Matrix& g, std::span<const double> y, std::span<const double> x, double scale) {
  if (y.size() != g.rows() || x.size() != g.cols()) throw InvalidArgument("outer_add: shape mismatch");
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const double yr = scale * y[r];
    if (yr == 0.0) continue;
    auto gr = g.row(r);
    for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += yr * x[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace chronotag
