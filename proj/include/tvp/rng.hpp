#pragma once

#include <cstdint>
#include <limits>

namespace tvp {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ull));
}

// Counter-based generator: the stream for (seed, a, b) is fixed regardless of
// the order in which streams are consumed. Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept : key_(derive_key(seed, a, b)) {}

  constexpr result_type operator()() noexcept { return mix64(key_ + 0x632BE59BD9B4E019ull * ++counter_); }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

} // namespace tvp
