#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "gainlora/mat.hpp"

namespace gainlora {

// Deterministic stream: std::mt19937_64 (sequence fixed by the standard),
// 53-bit uniforms and Box-Muller normals computed here rather than through
// the implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream keyed by (seed, stream) via a splitmix64 mix.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Entries i.i.d. N(0, std^2).
Mat gaussian_init(Rng& rng, std::size_t rows, std::size_t cols, double std);

}  // namespace gainlora
