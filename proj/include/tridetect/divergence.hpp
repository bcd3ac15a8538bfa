#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tridetect/matrix.hpp"

namespace tridetect {

// Probability vector over n atoms.
struct DiscreteDistribution {
  Vector p;

  explicit DiscreteDistribution(Vector probs);
  std::size_t atoms() const noexcept { return p.size(); }
  std::vector<std::size_t> support() const;
};

// Discriminator output per atom, strictly inside (0, 1).
struct DiscriminatorFn {
  Vector d;
  explicit DiscriminatorFn(Vector values);
};

// joint(x, y) >= 0 summing to 1; q(y | x) row-stochastic.
struct DiscreteLatentModel {
  Matrix joint;
  Matrix q;
  DiscreteLatentModel(Matrix joint_, Matrix q_);
};

// sum_{p_i > 0} p_i ln(p_i / q_i); +infinity when q misses part of p's support.
double kl(const DiscreteDistribution& p, const DiscreteDistribution& q);

// Jensen-Shannon divergence through the mixture M = (p + q) / 2. In [0, ln 2].
double js(const DiscreteDistribution& p, const DiscreteDistribution& q);

double entropy(const DiscreteDistribution& p);

// sum p_data ln d + sum p_gan ln(1 - d), skipping zero-weight atoms.
double value_function(const DiscreteDistribution& p_data, const DiscreteDistribution& p_gan,
                      const DiscriminatorFn& d);

inline constexpr double kDiscriminatorClamp = 1e-15;

// p_data / (p_data + p_gan). Exact 0 or 1 is clamped by kDiscriminatorClamp;
// atoms outside both supports get 1/2 (they carry no weight).
DiscriminatorFn optimal_discriminator(const DiscreteDistribution& p_data,
                                      const DiscreteDistribution& p_gan);

struct ElboGap {
  double elbo = 0.0;
  double log_evidence = 0.0;
  double gap() const { return log_evidence - elbo; }
};

// Throws UndefinedEvidence when the x-marginal of atom x is zero.
ElboGap elbo_gap(const DiscreteLatentModel& m, std::size_t x);

// Row-normalized joint: p(y | x). Rows with zero evidence are left uniform.
Matrix true_posterior(const Matrix& joint);

// Evidence bound on KL(p_data || p_x) where p_x is the joint's x-marginal:
//   KL <= E_{p_data}[-ELBO] - H(p_data)
struct KlElboBound {
  double kl = 0.0;
  double bound = 0.0;
};
KlElboBound kl_elbo_bound(const DiscreteDistribution& p_data, const DiscreteLatentModel& m);

// Best JS(p, q) over q supported on `support`, via random search followed by
// pairwise coordinate refinement.
struct RestrictedOptimum {
  double js = 0.0;
  Vector q;
};
RestrictedOptimum best_restricted_js(const DiscreteDistribution& p,
                                     const std::vector<std::size_t>& support,
                                     std::mt19937_64& rng, int random_trials = 256);

struct CoverageRow {
  std::size_t support_size = 0;
  double best_js = 0.0;
  bool kl_infinite = false;  // for every q tested at this support size
  std::size_t tested = 0;   // distributions q examined at this size
  std::vector<std::size_t> best_support;
};

struct CoverageReport {
  DiscreteDistribution p_data{Vector{1.0}};
  std::vector<CoverageRow> rows;  // support sizes 1..n
};

// For a random full-support p_data, the best JS achievable by a distribution
// confined to each support size, and whether KL(p_data || q) is finite there.
// All subsets are searched when n_atoms <= 8; above that only the
// highest-mass subset of each size.
CoverageReport coverage_experiment(std::size_t n_atoms, std::uint64_t seed);

std::string coverage_csv(const CoverageReport& r);

// Sampling helpers shared by the theory checks.
DiscreteDistribution random_distribution(std::size_t n, std::mt19937_64& rng);
DiscreteDistribution random_distribution_on(std::size_t n, const std::vector<std::size_t>& support,
                                            std::mt19937_64& rng);
DiscreteLatentModel random_latent_model(std::size_t nx, std::size_t ny, std::mt19937_64& rng);

}  // namespace tridetect
