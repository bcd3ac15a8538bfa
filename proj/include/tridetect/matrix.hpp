#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tridetect {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a (n x k) times b (k x m). Accumulates over k in increasing order.
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T (k x n)^T times b (k x m) -> (n x m).
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// a (n x m) times b^T where b is (k x m) -> (n x k).
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// Rows `idx` of m restricted to columns [col_begin, col_end).
Matrix gather(const Matrix& m, std::span<const std::size_t> idx, std::size_t col_begin,
              std::size_t col_end);

bool all_finite(std::span<const double> v) noexcept;

// log(sum(exp(v))) with max shift. Throws ContractViolation on empty input.
double log_sum_exp(std::span<const double> v);

// exp(v_i / tau) / sum_j exp(v_j / tau). Throws ContractViolation if tau <= 0.
Vector softmax_temp(std::span<const double> v, double tau);

// log of softmax_temp, computed directly from the shifted logits.
Vector log_softmax_temp(std::span<const double> v, double tau);

// Scale every row to sum 1. Entries must be nonnegative; a row with zero sum
// throws DegenerateInput.
Matrix row_normalize(const Matrix& m);

// Scale every column to sum `target`. Zero column sum throws DegenerateInput.
Matrix col_scale_to(const Matrix& m, double target);

Vector row_sums(const Matrix& m);
Vector col_sums(const Matrix& m);

}  // namespace tridetect
