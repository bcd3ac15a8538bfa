#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tridetect/divergence.hpp"

namespace tridetect {

struct TheoryOptions {
  std::uint64_t seed = 1024;
  std::size_t atoms = 6;
  bool sinkhorn = false;
  int pairs = 1000;                // identity check
  int inequality_pairs = 100;      // x discriminators_per_pair combinations
  int discriminators_per_pair = 100;
  int latent_models = 100;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct TheoryReport {
  std::vector<CheckResult> checks;
  std::optional<CoverageReport> coverage;
  bool all_passed() const;
  std::string table() const;
};

// Runs every divergence identity/inequality check (plus the Sinkhorn
// constraint checks when requested) with a fixed seed.
TheoryReport run_theory_checks(const TheoryOptions& opt);

}  // namespace tridetect
