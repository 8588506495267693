#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Self-check suites shared by the CLI (`gradcheck`, `selftest`) and the tests.

namespace mner::verify {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  double value = 0.0;      // worst observed error
  double tolerance = 0.0;
  std::string detail;
};

// Central differences (64-bit, step h) for every differentiable op and the
// composite blocks, over `seeds` random instances each.
std::vector<CheckOutcome> gradient_suite(std::size_t seeds = 5, double h = 1e-4, double tolerance = 1e-5);

// Forward algorithm, Viterbi and normalisation against path enumeration for
// n in 1..5 and L in 2..5.
std::vector<CheckOutcome> crf_oracle_suite(std::size_t instances = 20);

// Contrastive loss against a direct sum, scale invariance and the
// two-pair orthonormal closed form.
std::vector<CheckOutcome> contrastive_oracle_suite(std::size_t seeds = 10);

// Cross-attention block against a per-head loop, plus key permutation invariance.
std::vector<CheckOutcome> cross_attention_suite(std::size_t seeds = 5);

bool all_passed(const std::vector<CheckOutcome>& outcomes);
std::string format_outcome(const CheckOutcome& outcome);

}  // namespace mner::verify
