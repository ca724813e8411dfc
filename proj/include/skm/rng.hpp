#pragma once

// Counter-based 64-bit generator and stream derivation.
//
// SplitMix64 is used in counter mode: output number c of a stream keyed by s
// is mix64(s + (c + 1) * 0x9e3779b97f4a7c15). Derived streams hash their keys
// into a fresh stream key, so the partitioning of randomness over trials,
// iterations and sample positions is fixed independently of scheduling:
//   trial stream      key = seed ^ mix64(trial_index)
//   iteration stream  key = derive(trial_key, {tag, iteration})
//   label stream      key = derive(iteration_key, {tag, position})

#include <cmath>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace skm {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  constexpr explicit SplitMix64(std::uint64_t key = 0) noexcept : key_(key) {}

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  /// Number of 64-bit outputs consumed so far.
  constexpr std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

constexpr std::uint64_t derive_key(std::uint64_t key,
                                   std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = mix64(key ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t part : parts) h = mix64(h ^ mix64(part + SplitMix64::kGamma));
  return h;
}

inline SplitMix64 derive_stream(std::uint64_t key,
                                std::initializer_list<std::uint64_t> parts) noexcept {
  return SplitMix64(derive_key(key, parts));
}

constexpr std::uint64_t trial_key(std::uint64_t seed, std::uint64_t trial_index) noexcept {
  return seed ^ mix64(trial_index);
}

template <class G>
concept Bits64Generator = requires(G& g) {
  { g() } -> std::same_as<std::uint64_t>;
} && G::min() == 0 && G::max() == std::numeric_limits<std::uint64_t>::max();

/// Uniform double in [0, 1) with 53 random bits.
template <Bits64Generator G>
double uniform01(G& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

__extension__ using uint128 = unsigned __int128;

/// Uniform integer in [0, bound); Lemire's multiply-shift with rejection.
template <Bits64Generator G>
std::uint64_t uniform_below(G& gen, std::uint64_t bound) {
  uint128 m = static_cast<uint128>(gen()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<uint128>(gen()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

/// Standard normal via Box-Muller; consumes two outputs per call.
template <Bits64Generator G>
double standard_normal(G& gen) {
  const double u1 = 1.0 - uniform01(gen);  // (0, 1]
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace skm
