#include "dgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "dgcn/errors.hpp"

namespace dgcn {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

// Per-vertex m nearest other vertices, ascending (distance, index).
std::vector<std::int32_t> sorted_candidates(const Tensor& features, std::size_t m) {
  require(features.ndim() == 2, "knn: features must be 2-D, got " + features.shape_str());
  if (!features.all_finite()) throw ContractError("knn: non-finite feature values");
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (m > n - 1)
    throw InsufficientPointsError("knn: " + std::to_string(m) + " neighbors requested from " +
                                  std::to_string(n) + " points");

  std::vector<std::int32_t> out(n * m);
  std::vector<std::pair<double, std::int32_t>> cand(n - 1);
  for (std::size_t v = 0; v < n; ++v) {
    const double* fv = features.data.data() + v * d;
    std::size_t w = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (u == v) continue;
      cand[w++] = {sq_dist(fv, features.data.data() + u * d, d),
                   static_cast<std::int32_t>(u)};
    }
    const auto mid = cand.begin() + static_cast<std::ptrdiff_t>(m);
    std::nth_element(cand.begin(), mid - 1, cand.end());
    std::sort(cand.begin(), mid);
    for (std::size_t s = 0; s < m; ++s) out[v * m + s] = cand[s].second;
  }
  return out;
}

}  // namespace

int effective_dilation(int d, int k, std::size_t n) {
  require(d >= 1 && k >= 1, "dilation: d and k must be positive");
  const long cap = (static_cast<long>(n) - 1) / k;
  return static_cast<int>(std::max(1L, std::min(static_cast<long>(d), cap)));
}

Tensor pairwise_sq_dist(const Tensor& features) {
  require(features.ndim() == 2 && features.dim(0) >= 1,
          "pairwise_sq_dist: features must be [N>=1, D]");
  if (!features.all_finite()) throw ContractError("pairwise_sq_dist: non-finite feature values");
  const std::size_t n = features.dim(0), d = features.dim(1);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = sq_dist(features.data.data() + i * d, features.data.data() + j * d, d);
      out.at(i, j) = v;
      out.at(j, i) = v;
    }
  return out;
}

NeighborList knn(const Tensor& features, int k) {
  require(k >= 1, "knn: k must be positive");
  NeighborList nl;
  nl.k = static_cast<std::size_t>(k);
  nl.indices = sorted_candidates(features, nl.k);
  return nl;
}

NeighborList dilated_knn(const Tensor& features, int k, const DilationSpec& spec) {
  require(k >= 1, "dilated_knn: k must be positive");
  const std::size_t n = features.dim(0);
  const int d = effective_dilation(spec.d, k, n);
  const std::size_t m = static_cast<std::size_t>(k) * static_cast<std::size_t>(d);
  const std::vector<std::int32_t> cand = sorted_candidates(features, m);

  NeighborList nl;
  nl.k = static_cast<std::size_t>(k);
  nl.indices.resize(n * nl.k);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t s = 0; s < nl.k; ++s)
      nl.indices[v * nl.k + s] = cand[v * m + s * static_cast<std::size_t>(d)];
  return nl;
}

NeighborList stochastic_dilated_knn(const Tensor& features, int k, const DilationSpec& spec,
                                    Rng& rng, std::vector<std::uint8_t>* random_branch) {
  require(k >= 1, "stochastic_dilated_knn: k must be positive");
  require(spec.epsilon >= 0.0 && spec.epsilon <= 1.0,
          "stochastic_dilated_knn: epsilon must lie in [0,1]");
  const std::size_t n = features.dim(0);
  if (random_branch != nullptr) random_branch->assign(n, 0);
  if (spec.mode == Mode::eval || spec.epsilon == 0.0) return dilated_knn(features, k, spec);

  const int d = effective_dilation(spec.d, k, n);
  const std::size_t m = static_cast<std::size_t>(k) * static_cast<std::size_t>(d);
  const std::vector<std::int32_t> cand = sorted_candidates(features, m);

  NeighborList nl;
  nl.k = static_cast<std::size_t>(k);
  nl.indices.resize(n * nl.k);
  for (std::size_t v = 0; v < n; ++v) {
    if (uniform01(rng) < spec.epsilon) {
      if (random_branch != nullptr) (*random_branch)[v] = 1;
      // ascending candidate ranks, so d=1 collapses to the deterministic pick
      const std::vector<int> picks = sample_distinct(rng, static_cast<int>(m), k);
      for (std::size_t s = 0; s < nl.k; ++s)
        nl.indices[v * nl.k + s] = cand[v * m + static_cast<std::size_t>(picks[s])];
    } else {
      for (std::size_t s = 0; s < nl.k; ++s)
        nl.indices[v * nl.k + s] = cand[v * m + s * static_cast<std::size_t>(d)];
    }
  }
  return nl;
}

NeighborList build_input_graph(const PointCloud& cloud, int k, const DilationSpec& spec,
                               Rng& rng) {
  require(cloud.size() >= 1 && cloud.coords.ndim() == 2 && cloud.coords.dim(1) == 3,
          "build_input_graph: coords must be [N>=1, 3]");
  return stochastic_dilated_knn(cloud.coords, k, spec, rng);
}

}  // namespace dgcn
