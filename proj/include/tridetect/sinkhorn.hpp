#pragma once

#include "tridetect/matrix.hpp"

namespace tridetect {

struct SinkhornConfig {
  double epsilon = 0.05;
  int iterations = 3;
};

// Balanced soft assignment of B fake samples (rows) to K clusters (columns).
// Rows sum to 1; column sums approach B/K as iterations grow.
struct AssignmentMatrix {
  Matrix q;

  std::size_t samples() const noexcept { return q.rows(); }
  std::size_t clusters() const noexcept { return q.cols(); }
};

// Entropy-regularized balanced assignment:
//   Q0 = exp(Z / eps)  (each row shifted by its max before exp)
//   repeat T times: row-normalize, scale columns to B/K
//   final row-normalize
// Throws ContractViolation on bad shapes, non-finite logits or bad config;
// DegenerateInput if a column underflows to zero mass.
AssignmentMatrix sinkhorn(const Matrix& logits, const SinkhornConfig& cfg);

// Pullback of an upstream gradient dL/dQ through the map above, giving dL/dZ.
Matrix sinkhorn_vjp(const Matrix& logits, const SinkhornConfig& cfg, const Matrix& upstream);

// max_j |colsum_j - B/K| / (B/K)
double balance_deviation(const AssignmentMatrix& a);

// Mean over rows of -sum_k q_ik log q_ik.
double mean_row_entropy(const AssignmentMatrix& a);

}  // namespace tridetect
