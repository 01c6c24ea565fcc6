#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace moelab {

// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t splitmix64(std::uint64_t x);

// Derives a child seed from (parent, index). For a fixed parent this is a
// bijection in index, so distinct indices always give distinct seeds.
std::uint64_t mix_seed(std::uint64_t parent, std::uint64_t index);

// Seeded generator with platform-stable draws. std::mt19937_64 output is fixed
// by the standard; the distributions on top are our own because the standard
// library ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace moelab
