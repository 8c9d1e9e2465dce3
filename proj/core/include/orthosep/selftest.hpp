#pragma once

#include <string>
#include <vector>

namespace orthosep {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Deterministic invariant suite: projector identities, analytic-vs-numeric
/// gradients, exchange-model oracles, rank-sum paths, encoding bounds,
/// optimizer and scheduler state machines. Mirrors the unit tests.
std::vector<CheckResult> run_selftests();

}  // namespace orthosep
