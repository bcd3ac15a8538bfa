#include "tridetect/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tridetect/errors.hpp"

namespace tridetect {
namespace {

void check_inputs(const Matrix& logits, const SinkhornConfig& cfg) {
  require(logits.rows() >= 1, "sinkhorn: need at least one row");
  require(logits.cols() >= 2, "sinkhorn: need at least two clusters");
  require(cfg.epsilon > 0.0, "sinkhorn: epsilon must be positive");
  require(cfg.iterations >= 1, "sinkhorn: iterations must be >= 1");
  require(all_finite(logits.data()), "sinkhorn: non-finite logits");
}

Matrix initial_kernel(const Matrix& logits, double epsilon) {
  Matrix q(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    for (std::size_t j = 0; j < r.size(); ++j) q(i, j) = std::exp((r[j] - mx) / epsilon);
  }
  return q;
}

Matrix column_step(const Matrix& q, double target) {
  try {
    return col_scale_to(q, target);
  } catch (const DegenerateInput& e) {
    throw DegenerateInput(std::string("sinkhorn: cluster lost all mass (") + e.what() +
                          "); logits spread exceeds exp range at this epsilon");
  }
}

// Forward pass keeping every intermediate needed for the pullback.
struct Trace {
  Matrix kernel;                // Q0
  std::vector<Matrix> rowed;    // after each row step
  std::vector<Matrix> coled;    // after each column step
  Matrix out;
};

Trace run(const Matrix& logits, const SinkhornConfig& cfg) {
  Trace t;
  const double target =
      static_cast<double>(logits.rows()) / static_cast<double>(logits.cols());
  t.kernel = initial_kernel(logits, cfg.epsilon);
  const Matrix* cur = &t.kernel;
  for (int it = 0; it < cfg.iterations; ++it) {
    t.rowed.push_back(row_normalize(*cur));
    t.coled.push_back(column_step(t.rowed.back(), target));
    cur = &t.coled.back();
  }
  t.out = row_normalize(*cur);
  return t;
}

// y = x / rowsum(x): dx_ij = (dy_ij - sum_k dy_ik y_ik) / rowsum_i
Matrix row_normalize_vjp(const Matrix& x, const Matrix& y, const Matrix& dy) {
  Matrix dx(x.rows(), x.cols());
  const Vector sums = row_sums(x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t k = 0; k < x.cols(); ++k) dot += dy(i, k) * y(i, k);
    for (std::size_t j = 0; j < x.cols(); ++j) dx(i, j) = (dy(i, j) - dot) / sums[i];
  }
  return dx;
}

// y = c x / colsum(x): dx_ij = (c / s_j) (dy_ij - sum_k dy_kj y_kj / c)
Matrix col_scale_vjp(const Matrix& x, const Matrix& y, const Matrix& dy, double c) {
  Matrix dx(x.rows(), x.cols());
  const Vector sums = col_sums(x);
  Vector dots(x.cols(), 0.0);
  for (std::size_t k = 0; k < x.rows(); ++k)
    for (std::size_t j = 0; j < x.cols(); ++j) dots[j] += dy(k, j) * y(k, j);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      dx(i, j) = (c / sums[j]) * (dy(i, j) - dots[j] / c);
  return dx;
}

}  // namespace

AssignmentMatrix sinkhorn(const Matrix& logits, const SinkhornConfig& cfg) {
  check_inputs(logits, cfg);
  return AssignmentMatrix{run(logits, cfg).out};
}

Matrix sinkhorn_vjp(const Matrix& logits, const SinkhornConfig& cfg, const Matrix& upstream) {
  check_inputs(logits, cfg);
  require(upstream.rows() == logits.rows() && upstream.cols() == logits.cols(),
          "sinkhorn_vjp: upstream shape mismatch");
  const double target =
      static_cast<double>(logits.rows()) / static_cast<double>(logits.cols());
  const Trace t = run(logits, cfg);

  Matrix grad = row_normalize_vjp(t.coled.back(), t.out, upstream);
  for (int it = cfg.iterations - 1; it >= 0; --it) {
    grad = col_scale_vjp(t.rowed[it], t.coled[it], grad, target);
    const Matrix& input = it == 0 ? t.kernel : t.coled[it - 1];
    grad = row_normalize_vjp(input, t.rowed[it], grad);
  }
  // The per-row max shift cancels in the first row normalization, so only
  // the exp contributes.
  for (std::size_t i = 0; i < grad.rows(); ++i)
    for (std::size_t j = 0; j < grad.cols(); ++j)
      grad(i, j) *= t.kernel(i, j) / cfg.epsilon;
  return grad;
}

double balance_deviation(const AssignmentMatrix& a) {
  const double target =
      static_cast<double>(a.samples()) / static_cast<double>(a.clusters());
  double worst = 0.0;
  for (double s : col_sums(a.q)) worst = std::max(worst, std::abs(s - target) / target);
  return worst;
}

double mean_row_entropy(const AssignmentMatrix& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.q.rows(); ++i)
    for (double p : a.q.row(i))
      if (p > 0.0) total -= p * std::log(p);
  return total / static_cast<double>(a.q.rows());
}

}  // namespace tridetect
