#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "tridetect/divergence.hpp"
#include "tridetect/errors.hpp"
#include "tridetect/theory.hpp"

using namespace tridetect;

namespace {

const double kLn2 = std::log(2.0);

long double naive_kl(const Vector& p, const Vector& q) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += (long double)p[i] * std::log((long double)p[i] / q[i]);
  return s;
}

double naive_js(const Vector& p, const Vector& q) {
  Vector m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return static_cast<double>(0.5L * (naive_kl(p, m) + naive_kl(q, m)));
}

}  // namespace

TEST_CASE("kl examples") {
  std::mt19937_64 rng(1);
  const auto p = random_distribution(6, rng);
  CHECK(kl(p, p) == 0.0);
  CHECK(kl(DiscreteDistribution({1, 0}), DiscreteDistribution({0.5, 0.5})) ==
        doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(std::isinf(kl(DiscreteDistribution({0.5, 0.5}), DiscreteDistribution({1, 0}))));
  for (int t = 0; t < 100; ++t) {
    const auto a = random_distribution(2 + t % 7, rng), b = random_distribution(2 + t % 7, rng);
    CHECK(std::abs(kl(a, b) - (double)naive_kl(a.p, b.p)) <= 1e-12);
    CHECK(kl(a, b) >= 0.0);
  }
}

TEST_CASE("distribution validation") {
  CHECK_THROWS_AS(DiscreteDistribution({0.5, 0.6}), ContractViolation);
  CHECK_THROWS_AS(DiscreteDistribution({1.2, -0.2}), ContractViolation);
  CHECK_THROWS_AS(DiscreteDistribution(Vector{}), ContractViolation);
  CHECK_THROWS_AS(DiscriminatorFn({0.5, 1.0}), ContractViolation);
  CHECK_THROWS_AS(DiscriminatorFn({0.0, 0.5}), ContractViolation);
  CHECK_THROWS_AS(kl(DiscreteDistribution({1.0}), DiscreteDistribution({0.5, 0.5})), ContractViolation);
  CHECK(DiscreteDistribution({0.25, 0, 0.75}).support() == std::vector<std::size_t>{0, 2});
}

TEST_CASE("js examples and properties") {
  std::mt19937_64 rng(2);
  const auto p = random_distribution(5, rng);
  CHECK(js(p, p) == 0.0);
  CHECK(js(DiscreteDistribution({0.5, 0.5, 0, 0}), DiscreteDistribution({0, 0, 0.2, 0.8})) ==
        doctest::Approx(kLn2).epsilon(1e-15));
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + t % 9;
    const auto a = t % 3 ? random_distribution(n, rng) : random_distribution_on(n, {0}, rng);
    const auto b = random_distribution(n, rng);
    const double v = js(a, b);
    CHECK(std::isfinite(v));
    CHECK(std::abs(v - naive_js(a.p, b.p)) <= 1e-12);
    CHECK(std::abs(v - js(b, a)) <= 1e-12);
    CHECK(v >= 0.0);
    CHECK(v <= kLn2 + 1e-12);
  }
}

TEST_CASE("value function and optimal discriminator") {
  std::mt19937_64 rng(3);
  const auto p = random_distribution(4, rng), q = random_distribution(4, rng);
  CHECK(value_function(p, q, DiscriminatorFn(Vector(4, 0.5))) ==
        doctest::Approx(-2 * kLn2).epsilon(1e-15));

  const auto dsame = optimal_discriminator(p, p);
  for (double v : dsame.d) CHECK(v == 0.5);
  CHECK(value_function(p, p, dsame) == doctest::Approx(2 * js(p, p) - 2 * kLn2).epsilon(1e-15));

  const auto clamped =
      optimal_discriminator(DiscreteDistribution({0.5, 0.5, 0}), DiscreteDistribution({0, 0.5, 0.5}));
  CHECK(clamped.d[0] == 1.0 - kDiscriminatorClamp);
  CHECK(clamped.d[1] == 0.5);
  CHECK(clamped.d[2] == kDiscriminatorClamp);

  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + t % 7;
    const auto a = random_distribution(n, rng);
    const auto b = t % 4 == 0 ? random_distribution_on(n, {0, 1}, rng) : random_distribution(n, rng);
    const auto dstar = optimal_discriminator(a, b);
    const double vstar = value_function(a, b, dstar);
    CHECK(std::abs(vstar - (2 * js(a, b) - 2 * kLn2)) <= 1e-9);
  }

  std::uniform_real_distribution<double> u(1e-6, 1 - 1e-6);
  const auto a = random_distribution(5, rng), b = random_distribution(5, rng);
  const double vstar = value_function(a, b, optimal_discriminator(a, b));
  double best = -INFINITY;
  for (int t = 0; t < 10000; ++t) {
    Vector d(5);
    for (double& v : d) v = u(rng);
    best = std::max(best, value_function(a, b, DiscriminatorFn(d)));
  }
  CHECK(best <= vstar + 1e-9);
}

TEST_CASE("elbo gap") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto m = random_latent_model(2 + t % 5, 2 + t % 4, rng);
    const DiscreteLatentModel exact(m.joint, true_posterior(m.joint));
    for (std::size_t x = 0; x < m.joint.rows(); ++x) {
      const auto g = elbo_gap(m, x);
      double ev = 0.0;
      for (std::size_t y = 0; y < m.joint.cols(); ++y) ev += m.joint(x, y);
      CHECK(g.log_evidence == doctest::Approx(std::log(ev)).epsilon(1e-14));
      double elbo = 0.0;
      for (std::size_t y = 0; y < m.joint.cols(); ++y)
        if (m.q(x, y) > 0) elbo += m.q(x, y) * (std::log(m.joint(x, y)) - std::log(m.q(x, y)));
      CHECK(std::abs(g.elbo - elbo) <= 1e-12);
      CHECK(g.gap() > 0.0);
      CHECK(std::abs(elbo_gap(exact, x).gap()) < 1e-12);
    }
  }

  const DiscreteLatentModel det(Matrix{{0.3, 0}, {0, 0.7}}, Matrix{{1, 0}, {0, 1}});
  CHECK(elbo_gap(det, 0).gap() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(elbo_gap(det, 1).gap() == doctest::Approx(0.0).epsilon(1e-15));

  const DiscreteLatentModel holes(Matrix{{0.5, 0.5}, {0, 0}}, Matrix{{0.5, 0.5}, {0.5, 0.5}});
  CHECK_THROWS_AS(elbo_gap(holes, 1), UndefinedEvidence);
  CHECK_THROWS_AS(elbo_gap(holes, 2), ContractViolation);
  CHECK_THROWS_AS(DiscreteLatentModel(Matrix{{0.5, 0.6}}, Matrix{{1, 0}}), ContractViolation);
}

TEST_CASE("kl is bounded by the expected negative elbo minus data entropy") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto m = random_latent_model(3 + t % 4, 2 + t % 3, rng);
    const auto p = random_distribution(m.joint.rows(), rng);
    const auto b = kl_elbo_bound(p, m);
    Vector px(m.joint.rows());
    for (std::size_t x = 0; x < px.size(); ++x)
      for (std::size_t y = 0; y < m.joint.cols(); ++y) px[x] += m.joint(x, y);
    double neg_elbo = 0.0;
    for (std::size_t x = 0; x < px.size(); ++x) neg_elbo -= p.p[x] * elbo_gap(m, x).elbo;
    CHECK(std::abs(b.kl - (double)naive_kl(p.p, px)) <= 1e-12);
    CHECK(std::abs(b.bound - (neg_elbo - entropy(p))) <= 1e-12);
    CHECK(b.kl <= b.bound + 1e-12);

    const DiscreteLatentModel exact(m.joint, true_posterior(m.joint));
    const auto e = kl_elbo_bound(p, exact);
    CHECK(std::abs(e.kl - e.bound) <= 1e-10);
  }
}

TEST_CASE("restricted JS against dense random search") {
  const DiscreteDistribution uniform(Vector(4, 0.25));
  std::mt19937_64 rng(6);
  const auto best = best_restricted_js(uniform, {0, 1}, rng);

  std::mt19937_64 search(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double oracle = INFINITY;
  for (int t = 0; t < 1000000; ++t) {
    const double a = u(search);
    oracle = std::min(oracle, js(uniform, DiscreteDistribution({a, 1 - a, 0, 0})));
  }
  CHECK(std::abs(best.js - oracle) <= 1e-3);
  CHECK(best.js == doctest::Approx(0.75 * std::log(4.0 / 3.0)).epsilon(1e-6));
  CHECK(best.q[2] == 0.0);
  CHECK(best.q[3] == 0.0);
}

TEST_CASE("coverage experiment") {
  for (std::size_t n : {4u, 6u, 8u, 10u}) {
    const auto r = coverage_experiment(n, 11 + n);
    REQUIRE(r.rows.size() == n);
    for (const auto& row : r.rows) {
      CHECK(std::isfinite(row.best_js));
      CHECK(row.tested >= 1);
      CHECK(row.best_support.size() == row.support_size);
      if (row.support_size < n) {
        CHECK(row.kl_infinite);
        CHECK(row.best_js > 0.0);
      }
    }
    CHECK(r.rows.back().best_js == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(r.rows.back().kl_infinite);
    for (std::size_t s = 1; s < n; ++s) CHECK(r.rows[s].best_js <= r.rows[s - 1].best_js + 1e-9);
  }
  CHECK(coverage_experiment(8, 3).rows[2].tested >= 56);
  CHECK_THROWS_AS(coverage_experiment(3, 1), ContractViolation);
  const auto csv = coverage_csv(coverage_experiment(4, 1));
  CHECK(csv.rfind("support_size,best_js,kl_status", 0) == 0);
}

TEST_CASE("theory checks pass") {
  const auto r = run_theory_checks({});
  CHECK(r.all_passed());
  CHECK(r.coverage.has_value());
  CHECK(r.table().find("FAIL") == std::string::npos);

  TheoryOptions fast;
  fast.pairs = 100;
  fast.inequality_pairs = 10;
  fast.latent_models = 20;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    fast.seed = seed;
    const auto s = run_theory_checks(fast);
    INFO(s.table());
    CHECK(s.all_passed());
  }
  fast.atoms = 2;
  CHECK(run_theory_checks(fast).all_passed());
  fast.sinkhorn = true;
  const auto with_sinkhorn = run_theory_checks(fast);
  CHECK(with_sinkhorn.all_passed());
  CHECK(with_sinkhorn.table().find("sinkhorn_constraints") != std::string::npos);
}
