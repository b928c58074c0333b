#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace bridge {

using Vec = Eigen::VectorXd;

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Seed of stream `stream` under master seed `seed`. Distinct (seed, stream)
// pairs give decorrelated engines, so batch runs can be split freely.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  Vec normal_vector(Eigen::Index dim);

  // Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace bridge
