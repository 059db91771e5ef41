#include "rlfa/rng.hpp"

#include <random>

namespace rlfa {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
}  // namespace

std::uint64_t CounterRng::mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

CounterRng CounterRng::split(std::uint64_t seed, std::uint64_t stream) {
  return CounterRng(RngState{mix(mix(seed) ^ mix(stream * kStreamSalt + kGolden)), 0});
}

CounterRng CounterRng::split(std::uint64_t stream) const {
  return CounterRng(RngState{mix(state_.key ^ mix(stream * kStreamSalt + kGolden)), 0});
}

CounterRng::result_type CounterRng::operator()() {
  ++state_.counter;
  return mix(state_.key + state_.counter * kGolden);
}

double CounterRng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace rlfa
