#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ubhess {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Hashes a root seed together with a path of stream tags, e.g.
// (seed, replicate, stream, level). Distinct paths give unrelated seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept;

// A single random stream. All randomness in the library flows through
// explicitly passed Rng objects, so every result is a function of the seeds.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(seed, path));
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(engine_); }

  std::uint64_t next_u64() noexcept { return engine_(); }

  engine_type& engine() noexcept { return engine_; }

 private:
  engine_type engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace ubhess
