#pragma once

// Full-chain gradient check: analytic gradients from batch_objective against
// central differences of loss values recomputed from scratch by the oracles.

#include <cstdint>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "tridetect/trainer.hpp"

namespace gradcheck {

using namespace tridetect;

enum class Term { kBinary, kAssignment, kConsistency, kTotal };

inline const char* term_name(Term t) {
  switch (t) {
    case Term::kBinary: return "binary";
    case Term::kAssignment: return "assignment";
    case Term::kConsistency: return "consistency";
    case Term::kTotal: return "total";
  }
  return "?";
}

struct Case {
  TriarchyModel model;
  Matrix view1, view2;
  std::vector<std::uint8_t> labels;
  TrainConfig cfg;
};

inline Case make_case(std::uint64_t seed, std::size_t clusters = 2) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> width(2, 8);
  const std::size_t in = width(rng);
  Case c;
  c.cfg.clusters = clusters;
  c.cfg.hidden = {width(rng), width(rng)};
  c.model = init_model(ModelShape{in, c.cfg.hidden, clusters}, seed);
  std::normal_distribution<double> n(0.0, 0.2);
  for (auto& l : c.model.layers())
    for (double& b : l.bias) b = n(rng);
  const std::size_t batch = 6 + seed % 5;
  c.view1 = oracle::random_matrix(batch, in, rng);
  c.view2 = c.view1;
  for (double& v : c.view2.data()) v += n(rng);
  c.labels.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) c.labels[i] = (i % 3 == 0) ? 0 : 1;
  return c;
}

inline TrainConfig term_config(TrainConfig cfg, Term t) {
  switch (t) {
    case Term::kBinary: cfg.loss.beta = 1.0; break;
    case Term::kAssignment:
      cfg.loss.beta = 0.0;
      cfg.loss.omega1 = 1.0;
      cfg.loss.omega2 = 0.0;
      break;
    case Term::kConsistency:
      cfg.loss.beta = 0.0;
      cfg.loss.omega1 = 0.0;
      cfg.loss.omega2 = 1.0;
      break;
    case Term::kTotal: break;
  }
  return cfg;
}

inline std::vector<std::size_t> fake_rows(const std::vector<std::uint8_t>& labels) {
  std::vector<std::size_t> f;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) f.push_back(i);
  return f;
}

inline Matrix fake_logits(const Matrix& z, const std::vector<std::size_t>& rows) {
  Matrix f(rows.size(), z.cols() - 1);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 1; k < z.cols(); ++k) f(i, k - 1) = z(rows[i], k);
  return f;
}

// Largest elementwise relative error over every parameter of the model.
inline double max_rel_error(Case c, Term t) {
  const TrainConfig cfg = term_config(c.cfg, t);
  const Gradients g = batch_objective(c.model, c.view1, c.view2, c.labels, cfg).grads;

  const auto fakes = fake_rows(c.labels);
  const auto& sk = cfg.sinkhorn;
  const Matrix q1_fixed =
      oracle::naive_sinkhorn(fake_logits(forward(c.model, c.view1), fakes), sk.epsilon, sk.iterations);
  const Matrix q2_fixed =
      oracle::naive_sinkhorn(fake_logits(forward(c.model, c.view2), fakes), sk.epsilon, sk.iterations);

  auto loss = [&] {
    const Matrix z1 = forward(c.model, c.view1);
    const Matrix z2 = forward(c.model, c.view2);
    const Matrix f1 = fake_logits(z1, fakes), f2 = fake_logits(z2, fakes);
    const double bin = oracle::naive_binary_loss(z1, c.labels);
    const double asg = oracle::naive_assignment_loss(f1, f2, q1_fixed, q2_fixed, cfg.loss.tau);
    const double cons = oracle::naive_consistency(oracle::naive_sinkhorn(f1, sk.epsilon, sk.iterations),
                                                  oracle::naive_sinkhorn(f2, sk.epsilon, sk.iterations));
    const auto& w = cfg.loss;
    return w.beta * bin + (1.0 - w.beta) * (w.omega1 * asg + w.omega2 * cons);
  };

  double worst = 0.0;
  for (std::size_t l = 0; l < c.model.layers().size(); ++l) {
    auto& layer = c.model.layers()[l];
    const auto fw = oracle::central_diff(layer.weight.data(), loss);
    for (std::size_t i = 0; i < fw.size(); ++i)
      worst = std::max(worst, oracle::rel_err(g.layers[l].weight.data()[i], fw[i]));
    const auto fb = oracle::central_diff(layer.bias, loss);
    for (std::size_t i = 0; i < fb.size(); ++i)
      worst = std::max(worst, oracle::rel_err(g.layers[l].bias[i], fb[i]));
  }
  return worst;
}

}  // namespace gradcheck
