#pragma once

#include <cstdint>
#include <limits>

namespace rlfa {

// Serializable position of a CounterRng.
struct RngState {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

// Counter-based generator: the n-th output is a pure function of (key, n),
// built on the SplitMix64 finalizer. Streams for independent trials are
// derived with `split(seed, stream)`, which makes simulation results
// independent of how trials are scheduled across threads.
// 
// Satisfies UniformRandomBitGenerator, but library code only consumes it
// through `uniform()` so results do not depend on the standard library's
// distribution implementations.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed) : state_{mix(seed), 0} {}
  explicit CounterRng(RngState state) : state_(state) {}

  static CounterRng split(std::uint64_t seed, std::uint64_t stream);
  CounterRng split(std::uint64_t stream) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  const RngState& state() const noexcept { return state_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  RngState state_{};
};

// Fresh 64-bit seed from the OS entropy source.
std::uint64_t entropy_seed();

}  // namespace rlfa
