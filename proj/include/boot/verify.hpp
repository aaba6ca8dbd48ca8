#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace boot {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  /// True when measured <= tolerance (or inside [lo, hi] for range checks).
  bool passed = false;
  std::string detail;
};

/// Deliberate faults for checking that the suite detects them.
enum class Mutation {
  none,
  /// Flips the sign of the y_t coefficient in the discrete signal update.
  signal_sign_flip,
};

Mutation mutation_from_string(const std::string& s);

/// Oracle suite: DDIM / signal-update equivalence, schedule identity,
/// convergence orders, parameterization round trips, gradcheck and the
/// stop-gradient contract.
std::vector<CheckResult> run_verify_suite(std::uint64_t seed, Mutation mutation = Mutation::none);

/// One line per check: name, measured value, tolerance, PASS/FAIL.
std::string format_check(const CheckResult& r);

}  // namespace boot
