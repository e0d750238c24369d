#include "ghostcert/random.hpp"

#include <random>

namespace ghostcert {

void fill_gaussian(std::span<double> out, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  Xoshiro256 gen(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (double& v : out) v = normal(gen);
}

Image gaussian_noise(const Shape& shape, double sigma, std::uint64_t seed, std::uint64_t index) {
  Image noise(shape);
  fill_gaussian(noise.values(), sigma, derive_seed(seed, 0x6E6F697365ull, index));
  return noise;
}

}  // namespace ghostcert
