#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace chronotag {

// Dense row-major matrix of doubles. Vectors are 1 x n matrices or plain
// std::vector<double> depending on context.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double value) noexcept;
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out += W * x
void gemv_add(const Matrix& w, std::span<const double> x, std::span<double> out);
// out += W^T * y
void gemv_transposed_add(const Matrix& w, std::span<const double> y, std::span<double> out);
// G += scale * y x^T
void outer_add(Matrix& g, std::span<const double> y, std::span<const double> x, double scale = 1.0);
double dot(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace chronotag
