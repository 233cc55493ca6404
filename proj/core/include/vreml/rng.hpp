#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>

namespace vreml {

// Philox4x32-10 counter-based generator. A stream is addressed by
// (seed, stream id); the value at a given position depends only on that
// address, never on call history or on other streams. This is what makes
// replications independent and parallel runs bit-identical to serial ones.
//
// Stream layout used by the simulation harness:
//   stream = replication * 2 + purpose, purpose 0 = spatial coefficients,
//   purpose 1 = observation noise.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  // Uniform on (0, 1], 53-bit resolution.
  double uniform();

  // Standard normal via Box-Muller (pairs drawn deterministically in stream
  // order).
  double normal();

  Eigen::VectorXd normal_vector(int size);

 private:
  std::uint32_t next_word();
  std::array<std::uint32_t, 4> block(std::uint64_t counter) const;

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int word_index_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace vreml
