#pragma once

#include <cstdint>
#include <vector>

#include "dgcn/rng.hpp"
#include "dgcn/tensor.hpp"

namespace dgcn {

struct PointCloud {
  Tensor coords;            // [N,3]
  Tensor aux;               // [N,C]; C may be 0
  std::vector<int> labels;  // length N, class ids

  std::size_t size() const { return coords.numel() == 0 ? 0 : coords.dim(0); }
};

// Directed edges v -> indices[v*k .. v*k+k); never the vertex itself.
struct NeighborList {
  std::size_t k = 0;
  std::vector<std::int32_t> indices;

  std::size_t size() const { return k == 0 ? 0 : indices.size() / k; }
  std::int32_t at(std::size_t v, std::size_t slot) const { return indices[v * k + slot]; }
};

struct DilationSpec {
  int d = 1;
  double epsilon = 0.0;  // probability of the random-aggregation branch
  Mode mode = Mode::eval;
};

// Shrinks d so k*d candidate ranks fit inside the N-1 other vertices.
int effective_dilation(int d, int k, std::size_t n);

Tensor pairwise_sq_dist(const Tensor& features);

// k distinct nearest other vertices, ascending distance, ties by ascending index.
NeighborList knn(const Tensor& features, int k);

// Ranks {0, d, 2d, ..., (k-1)d} of the k*d-nearest candidate list.
NeighborList dilated_knn(const Tensor& features, int k, const DilationSpec& spec);

// Per vertex, probability epsilon of replacing the dilated pick with k distinct
// uniform draws from the k*d candidates (train mode only; eval is deterministic).
// random_branch, when given, records which vertices took the random path.
NeighborList stochastic_dilated_knn(const Tensor& features, int k, const DilationSpec& spec,
                                    Rng& rng,
                                    std::vector<std::uint8_t>* random_branch = nullptr);

// Layer-0 graph over coordinates only; aux features never participate.
NeighborList build_input_graph(const PointCloud& cloud, int k, const DilationSpec& spec,
                               Rng& rng);

}  // namespace dgcn
