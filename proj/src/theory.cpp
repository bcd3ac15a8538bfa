#include "tridetect/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "tridetect/errors.hpp"
#include "tridetect/rng.hpp"
#include "tridetect/sinkhorn.hpp"

namespace tridetect {
namespace {

const double kLn2 = std::log(2.0);

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// Random distribution whose support is a random nonempty subset.
DiscreteDistribution random_partial(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> sup;
  std::bernoulli_distribution keep(0.7);
  for (std::size_t i = 0; i < n; ++i)
    if (keep(rng)) sup.push_back(i);
  if (sup.empty()) sup.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  return random_distribution_on(n, sup, rng);
}

CheckResult js_properties(const TheoryOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, {1}));
  double worst_asym = 0.0, worst = 0.0;
  for (int t = 0; t < opt.pairs; ++t) {
    const auto p = random_partial(opt.atoms, rng);
    const auto q = random_partial(opt.atoms, rng);
    const double a = js(p, q), b = js(q, p);
    worst_asym = std::max(worst_asym, std::abs(a - b));
    worst = std::max(worst, a);
  }
  return {"js_symmetric_bounded", worst_asym <= 1e-12 && worst <= kLn2 + 1e-12,
          fmt("max |js(p,q)-js(q,p)| = %.3g, max js = %.6f", worst_asym, worst)};
}

CheckResult optimal_value_identity(const TheoryOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, {2}));
  double worst = 0.0;
  for (int t = 0; t < opt.pairs; ++t) {
    const auto pd = random_partial(opt.atoms, rng);
    const auto pg = random_partial(opt.atoms, rng);
    const double v = value_function(pd, pg, optimal_discriminator(pd, pg));
    worst = std::max(worst, std::abs(v - (2.0 * js(pd, pg) - 2.0 * kLn2)));
  }
  return {"optimal_discriminator_value", worst <= 1e-9,
          fmt("max |V(D*) - (2 JS - 2 ln 2)| = %.3g over pairs", worst)};
}

CheckResult discriminator_inequality(const TheoryOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, {3}));
  std::uniform_real_distribution<double> unit(1e-6, 1.0 - 1e-6);
  double worst = -INFINITY;
  for (int t = 0; t < opt.inequality_pairs; ++t) {
    const auto pd = random_distribution(opt.atoms, rng);
    const auto pg = random_partial(opt.atoms, rng);
    const double best = value_function(pd, pg, optimal_discriminator(pd, pg));
    for (int k = 0; k < opt.discriminators_per_pair; ++k) {
      Vector d(opt.atoms);
      for (double& x : d) x = unit(rng);
      worst = std::max(worst, value_function(pd, pg, DiscriminatorFn(d)) - best);
    }
  }
  return {"optimal_discriminator_dominates", worst <= 1e-9,
          fmt("max V(D) - V(D*) = %.3g (must be <= 1e-9)", worst)};
}

CheckResult elbo_inequality(const TheoryOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, {4}));
  const std::size_t ny = std::max<std::size_t>(2, opt.atoms);
  double worst_violation = -INFINITY, worst_eq_gap = 0.0;
  bool strict = true;
  for (int t = 0; t < opt.latent_models; ++t) {
    auto m = random_latent_model(opt.atoms, ny, rng);
    for (std::size_t x = 0; x < opt.atoms; ++x) {
      const auto g = elbo_gap(m, x);
      worst_violation = std::max(worst_violation, g.elbo - g.log_evidence);
      strict = strict && g.gap() > 0.0;
    }
    const DiscreteLatentModel exact(m.joint, true_posterior(m.joint));
    for (std::size_t x = 0; x < opt.atoms; ++x)
      worst_eq_gap = std::max(worst_eq_gap, std::abs(elbo_gap(exact, x).gap()));
  }
  return {"elbo_lower_bound", worst_violation <= 0.0 && worst_eq_gap < 1e-12 && strict,
          fmt("max elbo - log p(x) = %.3g; max gap at posterior = %.3g", worst_violation,
              worst_eq_gap)};
}

CheckResult kl_bound(const TheoryOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, {5}));
  const std::size_t ny = std::max<std::size_t>(2, opt.atoms);
  double worst_violation = -INFINITY, worst_eq = 0.0;
  for (int t = 0; t < opt.latent_models; ++t) {
    const auto pd = random_distribution(opt.atoms, rng);
    const auto m = random_latent_model(opt.atoms, ny, rng);
    const auto b = kl_elbo_bound(pd, m);
    worst_violation = std::max(worst_violation, b.kl - b.bound);
    const auto e = kl_elbo_bound(pd, DiscreteLatentModel(m.joint, true_posterior(m.joint)));
    worst_eq = std::max(worst_eq, std::abs(e.kl - e.bound));
  }
  return {"kl_elbo_bound", worst_violation <= 1e-12 && worst_eq <= 1e-10,
          fmt("max KL - bound = %.3g; max |KL - bound| at posterior = %.3g", worst_violation,
              worst_eq)};
}

CheckResult support_dichotomy(const TheoryOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, {6}));
  bool ok = true;
  double max_js = 0.0;
  int instances = 0;
  for (int t = 0; t < opt.pairs; ++t) {
    const auto pd = random_distribution(opt.atoms, rng);
    // strict subset support for q
    std::vector<std::size_t> idx(opt.atoms);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t s = std::uniform_int_distribution<std::size_t>(1, opt.atoms - 1)(rng);
    std::vector<std::size_t> sup(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s));
    const auto q = random_distribution_on(opt.atoms, sup, rng);
    const double j = js(pd, q);
    ok = ok && std::isinf(kl(pd, q)) && std::isfinite(j) && j <= kLn2 + 1e-12;
    max_js = std::max(max_js, j);
    ++instances;
  }
  return {"support_dichotomy", ok,
          fmt("%.0f strict-subset instances: KL infinite, max JS = %.6f", instances, max_js)};
}

CheckResult coverage_check(const CoverageReport& r) {
  bool ok = true;
  const std::size_t n = r.rows.size();
  for (const auto& row : r.rows) {
    if (row.support_size < n)
      ok = ok && row.kl_infinite && std::isfinite(row.best_js) && row.best_js <= kLn2;
    else
      ok = ok && !row.kl_infinite && row.best_js == 0.0;
  }
  // Shrinking the allowed support can only make the best JS worse.
  for (std::size_t i = 1; i < n; ++i) ok = ok && r.rows[i].best_js <= r.rows[i - 1].best_js + 1e-9;
  return {"coverage_table", ok,
          fmt("%.0f atoms; best JS with one atom = %.6f", static_cast<double>(n),
              r.rows.front().best_js)};
}

CheckResult sinkhorn_check(const TheoryOptions& opt) {
  std::mt19937_64 rng(derive_seed(opt.seed, {7}));
  std::uniform_int_distribution<std::size_t> rows(4, 128);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst_row = 0.0;
  bool monotone = true;
  for (int t = 0; t < 200; ++t) {
    Matrix z(rows(rng), 2);
    for (double& v : z.data()) v = normal(rng);
    const auto q2 = sinkhorn(z, {0.05, 2});
    const auto q20 = sinkhorn(z, {0.05, 20});
    for (double s : row_sums(q20.q)) worst_row = std::max(worst_row, std::abs(s - 1.0));
    monotone = monotone && balance_deviation(q20) <= balance_deviation(q2);
  }
  const auto uniform = sinkhorn(Matrix(16, 2, 0.3), {0.05, 3});
  const bool flat = std::all_of(uniform.q.data().begin(), uniform.q.data().end(),
                                [](double v) { return v == 0.5; });
  return {"sinkhorn_constraints", worst_row <= 1e-9 && monotone && flat,
          fmt("max |rowsum - 1| = %.3g; balance(T=20) <= balance(T=2): ", worst_row) +
              (monotone ? "yes" : "no")};
}

}  // namespace

bool TheoryReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string TheoryReport::table() const {
  std::size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  std::string out;
  for (const auto& c : checks)
    out += c.name + std::string(width + 1 - c.name.size(), ' ') + (c.passed ? "PASS  " : "FAIL  ") +
           c.detail + "\n";
  return out;
}

TheoryReport run_theory_checks(const TheoryOptions& opt) {
  require(opt.atoms >= 2, "theory-check: need at least 2 atoms");
  require(opt.pairs > 0 && opt.inequality_pairs > 0 && opt.discriminators_per_pair > 0 &&
              opt.latent_models > 0,
          "theory-check: sample counts must be positive");
  TheoryReport r;
  r.checks.push_back(js_properties(opt));
  r.checks.push_back(optimal_value_identity(opt));
  r.checks.push_back(discriminator_inequality(opt));
  r.checks.push_back(elbo_inequality(opt));
  r.checks.push_back(kl_bound(opt));
  r.checks.push_back(support_dichotomy(opt));
  r.coverage = coverage_experiment(std::clamp<std::size_t>(opt.atoms, 4, 8),
                                   derive_seed(opt.seed, {8}));
  r.checks.push_back(coverage_check(*r.coverage));
  if (opt.sinkhorn) r.checks.push_back(sinkhorn_check(opt));
  return r;
}

}  // namespace tridetect
