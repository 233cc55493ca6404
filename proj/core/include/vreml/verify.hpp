#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vreml {

// Randomised invariant suite over lattice instances: ELBO monotonicity,
// stationarity residuals, exactness of the Gaussian family at the posterior,
// the Jensen bound, finite-difference gradient checks, and block-update
// idempotence.
struct VerifyConfig {
  int n = 36;  // number of areal units; must be a perfect square >= 9
  int trials = 25;
  std::uint64_t seed = 1;
  bool sabotage_tau_order = false;  // deliberately mis-specified sweeps

  void validate() const;
};

struct VerifyCheck {
  std::string name;
  double tolerance = 0.0;
  double worst = 0.0;  // largest observed deviation; pass iff worst <= tolerance
  bool passed = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_passed() const;
};

VerifyReport run_verification(const VerifyConfig& config);

void print_verification(std::ostream& out, const VerifyReport& report);

}  // namespace vreml
