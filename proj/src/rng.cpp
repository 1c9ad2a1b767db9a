#include "hypoflow/sde.hpp"

#include <cmath>
#include <random>

namespace hypoflow {

NoiseGrid sample_noise(int d, double T, int n_steps, std::uint64_t seed, long path_index) {
  if (d < 1) throw ArgumentError("sample_noise: d must be >= 1");
  if (n_steps < 1) throw ArgumentError("sample_noise: n_steps must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw ArgumentError("sample_noise: T must be positive");
  if (path_index < 0) throw ArgumentError("sample_noise: path_index must be >= 0");

  NoiseGrid g;
  g.T = T;
  g.n_steps = n_steps;
  g.d = d;
  g.seed = seed;
  g.path_index = path_index;
  g.increments.resize(n_steps, d);

  // Stream derived from the (seed, index) pair through seed_seq mixing,
  // so distinct indices give unrelated engine states.
  auto idx = static_cast<std::uint64_t>(path_index);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32),
                    0x68797066u};
  std::mt19937_64 eng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = std::sqrt(g.dt());
  for (int k = 0; k < n_steps; ++k)
    for (int j = 0; j < d; ++j) g.increments(k, j) = s * normal(eng);
  return g;
}

NoiseGrid coarsen(const NoiseGrid& fine) {
  if (fine.n_steps % 2 != 0) throw ArgumentError("coarsen: n_steps must be even");
  NoiseGrid g = fine;
  g.n_steps = fine.n_steps / 2;
  g.increments.resize(g.n_steps, fine.d);
  for (int k = 0; k < g.n_steps; ++k)
    for (int j = 0; j < fine.d; ++j)
      g.increments(k, j) = fine.increments(2 * k, j) + fine.increments(2 * k + 1, j);
  return g;
}

}  // namespace hypoflow
