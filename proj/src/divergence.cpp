#include "tridetect/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "tridetect/errors.hpp"

namespace tridetect {
namespace {

constexpr double kSumTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Vector mixture(const Vector& a, const Vector& b) {
  Vector m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
  return m;
}

// KL on raw vectors; callers guarantee validity.
double kl_raw(const Vector& p, const Vector& q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

double js_raw(const Vector& p, const Vector& q) {
  const Vector m = mixture(p, q);
  return 0.5 * kl_raw(p, m) + 0.5 * kl_raw(q, m);
}

void combinations(std::size_t n, std::size_t k, std::size_t start, std::vector<std::size_t>& cur,
                  std::vector<std::vector<std::size_t>>& out) {
  if (cur.size() == k) {
    out.push_back(cur);
    return;
  }
  for (std::size_t i = start; i < n; ++i) {
    cur.push_back(i);
    combinations(n, k, i + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

DiscreteDistribution::DiscreteDistribution(Vector probs) : p(std::move(probs)) {
  require(!p.empty(), "DiscreteDistribution: no atoms");
  for (double v : p) require(std::isfinite(v) && v >= 0.0, "DiscreteDistribution: bad entry");
  require(std::abs(sum(p) - 1.0) <= kSumTol, "DiscreteDistribution: does not sum to 1");
}

std::vector<std::size_t> DiscreteDistribution::support() const {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s.push_back(i);
  return s;
}

DiscriminatorFn::DiscriminatorFn(Vector values) : d(std::move(values)) {
  for (double v : d) require(v > 0.0 && v < 1.0, "DiscriminatorFn: entries must lie in (0, 1)");
}

DiscreteLatentModel::DiscreteLatentModel(Matrix joint_, Matrix q_)
    : joint(std::move(joint_)), q(std::move(q_)) {
  require(joint.rows() == q.rows() && joint.cols() == q.cols(),
          "DiscreteLatentModel: joint and q shapes differ");
  for (double v : joint.data()) require(v >= 0.0 && std::isfinite(v), "joint: bad entry");
  require(std::abs(sum(joint.data()) - 1.0) <= kSumTol, "joint: does not sum to 1");
  for (std::size_t x = 0; x < q.rows(); ++x) {
    for (double v : q.row(x)) require(v >= 0.0 && std::isfinite(v), "q: bad entry");
    require(std::abs(sum(q.row(x)) - 1.0) <= kSumTol, "q: row is not stochastic");
  }
}

double kl(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  require(p.atoms() == q.atoms(), "kl: atom count mismatch");
  return kl_raw(p.p, q.p);
}

double js(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  require(p.atoms() == q.atoms(), "js: atom count mismatch");
  return js_raw(p.p, q.p);
}

double entropy(const DiscreteDistribution& p) {
  double h = 0.0;
  for (double v : p.p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double value_function(const DiscreteDistribution& p_data, const DiscreteDistribution& p_gan,
                      const DiscriminatorFn& d) {
  require(p_data.atoms() == p_gan.atoms() && d.d.size() == p_data.atoms(),
          "value_function: atom count mismatch");
  double v = 0.0;
  for (std::size_t i = 0; i < d.d.size(); ++i) {
    if (p_data.p[i] > 0.0) v += p_data.p[i] * std::log(d.d[i]);
    if (p_gan.p[i] > 0.0) v += p_gan.p[i] * std::log1p(-d.d[i]);
  }
  return v;
}

DiscriminatorFn optimal_discriminator(const DiscreteDistribution& p_data,
                                      const DiscreteDistribution& p_gan) {
  require(p_data.atoms() == p_gan.atoms(), "optimal_discriminator: atom count mismatch");
  Vector d(p_data.atoms(), 0.5);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double total = p_data.p[i] + p_gan.p[i];
    if (total <= 0.0) continue;
    d[i] = p_data.p[i] / total;
    if (d[i] <= 0.0) d[i] = kDiscriminatorClamp;
    if (d[i] >= 1.0) d[i] = 1.0 - kDiscriminatorClamp;
  }
  return DiscriminatorFn(std::move(d));
}

ElboGap elbo_gap(const DiscreteLatentModel& m, std::size_t x) {
  require(x < m.joint.rows(), "elbo_gap: atom out of range");
  const double evidence = sum(m.joint.row(x));
  if (!(evidence > 0.0)) throw UndefinedEvidence("elbo_gap: p(x) = 0");
  ElboGap g;
  g.log_evidence = std::log(evidence);
  for (std::size_t y = 0; y < m.q.cols(); ++y) {
    const double qy = m.q(x, y);
    if (qy <= 0.0) continue;
    if (m.joint(x, y) <= 0.0) {
      g.elbo = -kInf;
      return g;
    }
    g.elbo += qy * (std::log(m.joint(x, y)) - std::log(qy));
  }
  return g;
}

Matrix true_posterior(const Matrix& joint) {
  Matrix post(joint.rows(), joint.cols());
  for (std::size_t x = 0; x < joint.rows(); ++x) {
    const double evidence = sum(joint.row(x));
    for (std::size_t y = 0; y < joint.cols(); ++y)
      post(x, y) = evidence > 0.0 ? joint(x, y) / evidence : 1.0 / static_cast<double>(joint.cols());
  }
  return post;
}

KlElboBound kl_elbo_bound(const DiscreteDistribution& p_data, const DiscreteLatentModel& m) {
  require(p_data.atoms() == m.joint.rows(), "kl_elbo_bound: atom count mismatch");
  Vector marginal = row_sums(m.joint);
  const double total = sum(marginal);
  for (double& v : marginal) v /= total;
  KlElboBound out;
  out.kl = kl_raw(p_data.p, marginal);
  double expected_neg_elbo = 0.0;
  for (std::size_t x = 0; x < p_data.atoms(); ++x) {
    if (p_data.p[x] <= 0.0) continue;
    if (!(marginal[x] > 0.0)) {
      expected_neg_elbo = kInf;
      break;
    }
    expected_neg_elbo -= p_data.p[x] * elbo_gap(m, x).elbo;
  }
  out.bound = expected_neg_elbo - entropy(p_data);
  return out;
}

DiscreteDistribution random_distribution_on(std::size_t n, const std::vector<std::size_t>& support,
                                            std::mt19937_64& rng) {
  require(!support.empty(), "random_distribution_on: empty support");
  std::exponential_distribution<double> expo(1.0);
  Vector p(n, 0.0);
  double total = 0.0;
  for (std::size_t i : support) {
    p[i] = expo(rng) + 1e-3;
    total += p[i];
  }
  for (double& v : p) v /= total;
  // absorb rounding so the sum is exact to the last bit as far as possible
  const double drift = 1.0 - sum(p);
  p[support.front()] += drift;
  return DiscreteDistribution(std::move(p));
}

DiscreteDistribution random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return random_distribution_on(n, all, rng);
}

DiscreteLatentModel random_latent_model(std::size_t nx, std::size_t ny, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  Matrix joint(nx, ny);
  for (double& v : joint.data()) v = expo(rng) + 1e-3;
  const double total = sum(joint.data());
  for (double& v : joint.data()) v /= total;
  joint.data()[0] += 1.0 - sum(joint.data());
  Matrix q(nx, ny);
  for (std::size_t x = 0; x < nx; ++x) {
    double rs = 0.0;
    for (double& v : q.row(x)) rs += (v = expo(rng) + 1e-3);
    for (double& v : q.row(x)) v /= rs;
    q(x, 0) += 1.0 - sum(q.row(x));
  }
  return DiscreteLatentModel(std::move(joint), std::move(q));
}

RestrictedOptimum best_restricted_js(const DiscreteDistribution& p,
                                     const std::vector<std::size_t>& support,
                                     std::mt19937_64& rng, int random_trials) {
  require(!support.empty(), "best_restricted_js: empty support");
  const std::size_t n = p.atoms();

  // Start from p itself confined to the support.
  Vector best(n, 0.0);
  double mass = 0.0;
  for (std::size_t i : support) mass += p.p[i];
  for (std::size_t i : support)
    best[i] = mass > 0.0 ? p.p[i] / mass : 1.0 / static_cast<double>(support.size());
  double best_js = js_raw(p.p, best);

  for (int t = 0; t < random_trials; ++t) {
    Vector cand = random_distribution_on(n, support, rng).p;
    const double v = js_raw(p.p, cand);
    if (v < best_js) {
      best_js = v;
      best = std::move(cand);
    }
  }

  // Pairwise mass transfer with golden-section line search.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int sweep = 0; sweep < 200 && support.size() > 1; ++sweep) {
    const double before = best_js;
    for (std::size_t a = 0; a < support.size(); ++a) {
      for (std::size_t b = a + 1; b < support.size(); ++b) {
        const std::size_t i = support[a];
        const std::size_t j = support[b];
        const double pool = best[i] + best[j];
        auto eval = [&](double share) {
          Vector c = best;
          c[i] = share;
          c[j] = pool - share;
          return js_raw(p.p, c);
        };
        double lo = 0.0, hi = pool;
        double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
        double f1 = eval(x1), f2 = eval(x2);
        for (int it = 0; it < 80; ++it) {
          if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval(x1);
          } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval(x2);
          }
        }
        const double share = 0.5 * (lo + hi);
        const double v = eval(share);
        if (v < best_js) {
          best_js = v;
          best[i] = share;
          best[j] = pool - share;
        }
      }
    }
    if (before - best_js < 1e-15) break;
  }
  return {best_js, best};
}

CoverageReport coverage_experiment(std::size_t n_atoms, std::uint64_t seed) {
  require(n_atoms >= 4, "coverage_experiment: need at least 4 atoms");
  std::mt19937_64 rng(seed);
  CoverageReport report{random_distribution(n_atoms, rng), {}};
  const auto& p = report.p_data;

  std::vector<std::size_t> by_mass(n_atoms);
  std::iota(by_mass.begin(), by_mass.end(), std::size_t{0});
  std::stable_sort(by_mass.begin(), by_mass.end(),
                   [&](std::size_t a, std::size_t b) { return p.p[a] > p.p[b]; });

  for (std::size_t s = 1; s <= n_atoms; ++s) {
    CoverageRow row;
    row.support_size = s;
    if (s == n_atoms) {
      row.best_js = 0.0;
      row.best_support = by_mass;
      std::sort(row.best_support.begin(), row.best_support.end());
      row.kl_infinite = std::isinf(kl(p, p));
      row.tested = 1;
      report.rows.push_back(row);
      continue;
    }
    std::vector<std::vector<std::size_t>> subsets;
    if (n_atoms <= 8) {
      std::vector<std::size_t> cur;
      combinations(n_atoms, s, 0, cur, subsets);
    } else {
      std::vector<std::size_t> top(by_mass.begin(), by_mass.begin() + static_cast<std::ptrdiff_t>(s));
      std::sort(top.begin(), top.end());
      subsets.push_back(top);
    }
    row.best_js = INFINITY;
    row.kl_infinite = true;
    for (const auto& sub : subsets) {
      const auto opt = best_restricted_js(p, sub, rng, 64);
      const DiscreteDistribution q(opt.q);
      row.kl_infinite = row.kl_infinite && std::isinf(kl(p, q));
      ++row.tested;
      for (int t = 0; t < 4; ++t) {
        row.kl_infinite = row.kl_infinite && std::isinf(kl(p, random_distribution_on(n_atoms, sub, rng)));
        ++row.tested;
      }
      if (opt.js < row.best_js) {
        row.best_js = opt.js;
        row.best_support = sub;
      }
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string coverage_csv(const CoverageReport& r) {
  std::string out = "support_size,best_js,kl_status,tested,best_support\n";
  for (const auto& row : r.rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", row.best_js);
    std::string sup;
    for (std::size_t i = 0; i < row.best_support.size(); ++i)
      sup += (i ? " " : "") + std::to_string(row.best_support[i]);
    out += std::to_string(row.support_size) + "," + buf + "," +
           (row.kl_infinite ? "infinite" : "finite") + "," + std::to_string(row.tested) + "," +
           sup + "\n";
  }
  return out;
}

}  // namespace tridetect
