#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dgcn {

using Rng = std::mt19937_64;

// All sampling helpers are hand-rolled on top of the raw 64-bit stream so
// results are identical across standard library implementations.

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in [0,1).
inline double uniform01(Rng& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng& g, std::size_t n) { return g() % n; }

// Box-Muller; consumes two raw draws per call.
inline double normal01(Rng& g) {
  double u1 = uniform01(g);
  double u2 = uniform01(g);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// k distinct indices in [0,m), via partial Fisher-Yates, returned ascending.
inline std::vector<int> sample_distinct(Rng& g, int m, int k) {
  std::vector<int> pool(m);
  for (int i = 0; i < m; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) {
    std::size_t j = i + uniform_index(g, static_cast<std::size_t>(m - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

template <class T>
void shuffle_vec(std::vector<T>& v, Rng& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(g, i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace dgcn
