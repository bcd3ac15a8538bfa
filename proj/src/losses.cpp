#include "tridetect/losses.hpp"

#include <cmath>

#include "tridetect/errors.hpp"

namespace tridetect {

void LossWeights::validate() const {
  require(beta >= 0.0 && beta <= 1.0, "LossWeights: beta must be in [0, 1]");
  require(omega1 >= 0.0 && omega2 >= 0.0, "LossWeights: omega weights must be nonnegative");
  require(tau > 0.0, "LossWeights: tau must be positive");
}

BinaryLoss binary_loss(const Matrix& z, std::span<const std::uint8_t> labels) {
  require(z.rows() >= 1, "binary_loss: empty batch");
  require(z.cols() >= 3, "binary_loss: need 1 real + at least 2 cluster logits");
  require(labels.size() == z.rows(), "binary_loss: label count mismatch");
  const double n = static_cast<double>(z.rows());
  BinaryLoss out{0.0, Matrix(z.rows(), z.cols())};
  for (std::size_t i = 0; i < z.rows(); ++i) {
    require(labels[i] <= 1, "binary_loss: labels must be 0 or 1");
    const auto r = z.row(i);
    const auto fake_part = r.subspan(1);
    const double real_logit = r[0];
    const double fake_logit = log_sum_exp(fake_part);
    const double pair[2] = {real_logit, fake_logit};
    const double norm = log_sum_exp(pair);
    const double log_p_real = real_logit - norm;
    const double log_p_fake = fake_logit - norm;
    const double y = labels[i];
    out.value -= y * log_p_fake + (1.0 - y) * log_p_real;

    const double d_real = std::exp(log_p_real) - (1.0 - y);
    const double d_fake = std::exp(log_p_fake) - y;
    out.grad(i, 0) = d_real / n;
    for (std::size_t k = 0; k < fake_part.size(); ++k)
      out.grad(i, k + 1) = d_fake * std::exp(fake_part[k] - fake_logit) / n;
  }
  out.value /= n;
  return out;
}

AssignmentLoss assignment_loss(const Matrix& z_fake, const Matrix& z_fake_view2,
                               const AssignmentMatrix& q, const AssignmentMatrix& q2,
                               double tau) {
  require(tau > 0.0, "assignment_loss: tau must be positive");
  const std::size_t f = z_fake.rows();
  const std::size_t k = z_fake.cols();
  require(z_fake_view2.rows() == f && z_fake_view2.cols() == k,
          "assignment_loss: view shapes differ");
  require(q.q.rows() == f && q.q.cols() == k && q2.q.rows() == f && q2.q.cols() == k,
          "assignment_loss: assignment shape mismatch");
  AssignmentLoss out{0.0, Matrix(f, k), Matrix(f, k)};
  if (f == 0) return out;

  const double scale = 1.0 / (2.0 * static_cast<double>(f));
  // Each view's prediction is scored against the other view's assignment.
  auto accumulate = [&](const Matrix& z, const Matrix& target, Matrix& grad) {
    for (std::size_t i = 0; i < f; ++i) {
      const Vector logp = log_softmax_temp(z.row(i), tau);
      double mass = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        out.value -= scale * target(i, c) * logp[c];
        mass += target(i, c);
      }
      for (std::size_t c = 0; c < k; ++c)
        grad(i, c) = scale * (mass * std::exp(logp[c]) - target(i, c)) / tau;
    }
  };
  accumulate(z_fake, q2.q, out.grad_view1);
  accumulate(z_fake_view2, q.q, out.grad_view2);
  return out;
}

double consistency_loss(const AssignmentMatrix& q, const AssignmentMatrix& q2) {
  require(q.q.rows() == q2.q.rows() && q.q.cols() == q2.q.cols(),
          "consistency_loss: shape mismatch");
  if (q.q.rows() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < q.q.rows(); ++i)
    for (std::size_t c = 0; c < q.q.cols(); ++c) {
      const double d = q.q(i, c) - q2.q(i, c);
      acc += d * d;
    }
  return acc / static_cast<double>(q.q.rows());
}

ConsistencyGrad consistency_grad(const AssignmentMatrix& q, const AssignmentMatrix& q2) {
  require(q.q.rows() == q2.q.rows() && q.q.cols() == q2.q.cols(),
          "consistency_grad: shape mismatch");
  ConsistencyGrad g{Matrix(q.q.rows(), q.q.cols()), Matrix(q.q.rows(), q.q.cols())};
  if (q.q.rows() == 0) return g;
  const double scale = 2.0 / static_cast<double>(q.q.rows());
  for (std::size_t i = 0; i < q.q.size(); ++i) {
    const double d = scale * (q.q.data()[i] - q2.q.data()[i]);
    g.d_q.data()[i] = d;
    g.d_q2.data()[i] = -d;
  }
  return g;
}

LossReport total_loss(double binary, double assignment, double consistency,
                      const LossWeights& w) {
  w.validate();
  LossReport r;
  r.binary = binary;
  r.assignment = assignment;
  r.consistency = consistency;
  r.cluster = w.omega1 * assignment + w.omega2 * consistency;
  r.total = w.beta * binary + (1.0 - w.beta) * r.cluster;
  return r;
}

}  // namespace tridetect
