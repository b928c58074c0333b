#include "bridgesampler/rng.hpp"

namespace bridge {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

Vec Rng::normal_vector(Eigen::Index dim) {
  Vec z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = normal();
  return z;
}

}  // namespace bridge
