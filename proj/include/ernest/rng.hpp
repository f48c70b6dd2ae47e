#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ernest/errors.hpp"

namespace ernest {

enum class RngRole : std::uint64_t {
  Embedder = 1,
  Dsae = 2,
  Split = 3,
  Synth = 4,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic random stream whose state is a pure function of
// (master_seed, role, index). Streams with distinct coordinates are
// independent, so per-channel / per-component work can run in any order
// or in parallel without changing results.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, RngRole role, std::uint64_t index)
      : master_seed_(master_seed), role_(role), index_(index) {
    std::uint64_t s = detail::splitmix64(master_seed);
    s = detail::splitmix64(s ^ static_cast<std::uint64_t>(role));
    s = detail::splitmix64(s ^ index);
    engine_.seed(s);
  }

  std::uint64_t master_seed() const { return master_seed_; }
  RngRole role() const { return role_; }
  std::uint64_t index() const { return index_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ConfigError("RngStream::below: n must be positive");
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    if (values.size() < 2) return;
    for (std::size_t i = values.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(values[i], values[j]);
    }
  }

  // First k entries of a random permutation of [0, n).
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    if (k > n) throw ConfigError("sample_without_replacement: k > n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::uint64_t master_seed_;
  RngRole role_;
  std::uint64_t index_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ernest
