#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace chronotag {

// SplitMix64 finalizer step. Used to expand seeds and derive child streams.
//   z = (x += 0x9E3779B97F4A7C15)
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text) noexcept;

// Child seed for stream `stream` of `seed`. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// xoshiro256** 1.0 (Blackman & Vigna). The four state words are filled by
// four successive splitmix64 calls starting from `seed`.
//
// Derived draws. Everything except normal() is bit-exact on any IEEE-754
// platform; normal() also depends on the C library's log and cos.
//   uniform()      = (next() >> 11) * 2^-53                   in [0, 1)
//   below(n)       = next() % n, rejecting draws below (2^64 mod n)
//   normal()       = Box-Muller cosine branch, u1 = 1 - uniform(),
//                    u2 = uniform(); consumes exactly two draws
//   shuffle(span)  = Fisher-Yates from the back, j = below(i + 1)
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  // Independent generator for a named or numbered sub-stream.
  Rng fork(std::uint64_t stream) const noexcept { return Rng(derive_seed(seed_, stream)); }
  Rng fork(std::string_view label) const noexcept { return fork(fnv1a64(label)); }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace chronotag
