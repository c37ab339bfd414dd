#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace vamlab {

/// Counter-based pseudo-random stream (SplitMix64), keyed by a 64-bit seed
/// plus a purpose tag. Streams with different (seed, tag) keys are
/// independent, so garnet structure, rewards and dataset draws can each be
/// reproduced in isolation. Output is a pure function of (key, draw index):
/// results never depend on thread count or interleaving between streams.
///
/// All distributions are implemented here rather than via <random> so that
/// byte-identical sequences are produced across standard libraries.
class RngStream {
 public:
  RngStream(uint64_t seed, std::string_view tag);

  uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double();

  /// Uniform integer in {0, ..., bound-1}, bias-free (Lemire rejection).
  int next_below(int bound);

  /// Standard normal via Box-Muller; the paired draw is cached.
  double next_gauss();

  /// Uniformly random permutation of {0, ..., n-1} (Fisher-Yates).
  std::vector<int> permutation(int n);

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vamlab
