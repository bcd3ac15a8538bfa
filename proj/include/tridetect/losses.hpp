#pragma once

#include <cstdint>
#include <span>

#include "tridetect/matrix.hpp"
#include "tridetect/sinkhorn.hpp"

namespace tridetect {

struct LossWeights {
  double beta = 0.7;    // binary vs cluster balance
  double omega1 = 1.0;  // swapped-prediction weight
  double omega2 = 0.1;  // consistency weight
  double tau = 0.1;     // softmax temperature of the cluster predictions

  void validate() const;
};

struct LossReport {
  double binary = 0.0;
  double assignment = 0.0;
  double consistency = 0.0;
  double cluster = 0.0;
  double total = 0.0;
};

struct BinaryLoss {
  double value = 0.0;
  Matrix grad;  // d value / d z, same shape as z
};

// Cross-entropy of real vs fake where p(fake) marginalizes the K cluster
// probabilities of the (1 + K)-way softmax. labels: 0 = real, 1 = fake.
BinaryLoss binary_loss(const Matrix& z, std::span<const std::uint8_t> labels);

struct AssignmentLoss {
  double value = 0.0;
  Matrix grad_view1;  // w.r.t. fake-cluster logits of view 1
  Matrix grad_view2;
};

// Swapped prediction: view-2 assignments supervise view-1 predictions and
// vice versa. q and q2 are constants. F = 0 gives 0 with empty gradients.
AssignmentLoss assignment_loss(const Matrix& z_fake, const Matrix& z_fake_view2,
                               const AssignmentMatrix& q, const AssignmentMatrix& q2,
                               double tau);

// (1/F) sum_i ||q_i - q2_i||^2; 0 for F = 0.
double consistency_loss(const AssignmentMatrix& q, const AssignmentMatrix& q2);

struct ConsistencyGrad {
  Matrix d_q;
  Matrix d_q2;
};
ConsistencyGrad consistency_grad(const AssignmentMatrix& q, const AssignmentMatrix& q2);

LossReport total_loss(double binary, double assignment, double consistency,
                      const LossWeights& w);

}  // namespace tridetect
