#include "tridetect/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tridetect/errors.hpp"

namespace tridetect {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, "Matrix: data length != rows * cols");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, "Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      const double* br = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_at_b: row count mismatch");
  Matrix out(a.cols(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* br = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(k, i);
      if (s == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_a_bt: column count mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    for (std::size_t k = 0; k < b.rows(); ++k) {
      const double* br = b.row(k).data();
      double acc = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) acc += ar[j] * br[j];
      out(i, k) = acc;
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Matrix gather(const Matrix& m, std::span<const std::size_t> idx, std::size_t col_begin,
              std::size_t col_end) {
  require(col_begin <= col_end && col_end <= m.cols(), "gather: bad column range");
  Matrix out(idx.size(), col_end - col_begin);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] < m.rows(), "gather: row index out of range");
    for (std::size_t c = col_begin; c < col_end; ++c) out(r, c - col_begin) = m(idx[r], c);
  }
  return out;
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double log_sum_exp(std::span<const double> v) {
  require(!v.empty(), "log_sum_exp: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  if (std::isinf(mx)) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

Vector log_softmax_temp(std::span<const double> v, double tau) {
  require(tau > 0.0, "softmax_temp: tau must be positive");
  require(!v.empty(), "softmax_temp: empty input");
  Vector scaled(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = v[i] / tau;
  const double lse = log_sum_exp(scaled);
  for (double& s : scaled) s -= lse;
  return scaled;
}

Vector softmax_temp(std::span<const double> v, double tau) {
  require(tau > 0.0, "softmax_temp: tau must be positive");
  require(!v.empty(), "softmax_temp: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp((v[i] - mx) / tau);
    acc += out[i];
  }
  for (double& o : out) o /= acc;
  return out;
}

Vector row_sums(const Matrix& m) {
  Vector s(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double x : m.row(i)) s[i] += x;
  return s;
}

Vector col_sums(const Matrix& m) {
  Vector s(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += m(i, j);
  return s;
}

Matrix row_normalize(const Matrix& m) {
  Matrix out = m;
  const Vector sums = row_sums(m);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (!(sums[i] > 0.0))
      throw DegenerateInput("row_normalize: row " + std::to_string(i) + " has zero sum");
    for (double& x : out.row(i)) x /= sums[i];
  }
  return out;
}

Matrix col_scale_to(const Matrix& m, double target) {
  require(target > 0.0, "col_scale_to: target must be positive");
  Matrix out = m;
  const Vector sums = col_sums(m);
  for (std::size_t j = 0; j < m.cols(); ++j)
    if (!(sums[j] > 0.0))
      throw DegenerateInput("col_scale_to: column " + std::to_string(j) + " has zero sum");
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) *= target / sums[j];
  return out;
}

}  // namespace tridetect
