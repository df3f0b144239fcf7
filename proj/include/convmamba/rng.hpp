#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace convmamba {

// xoshiro256** seeded through splitmix64. Uniform doubles take the top 53
// bits; normals use the Box-Muller transform (both outputs are used, the
// second one is cached). Bounded integers use rejection sampling so every
// platform produces the same stream for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t NextU64();
  // Uniform on [0, 1).
  double Uniform();
  double Uniform(double lo, double hi);
  // Uniform on {0, ..., n-1}; n must be positive.
  std::uint64_t UniformInt(std::uint64_t n);
  double Normal();
  double Normal(double mean, double stddev);

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(UniformInt(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Independent child stream; used to hand sub-tasks their own generator.
  Rng Fork();

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace convmamba
