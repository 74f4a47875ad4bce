#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dgcn/layers.hpp"
#include "dgcn/tape.hpp"

namespace dgcn {

struct CheckResult {
  std::string name;
  double err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// Max relative error between tape gradients and central differences over every
// element of the listed tensors. The builder must bind them via tape.param()
// and return the network output; a fixed random linear readout makes the loss
// scalar without being symmetric in any input. The relative-error denominator
// is floored at 0.01 so FD roundoff on dead paths does not register.
double fd_max_rel(const std::vector<Tensor*>& params,
                  const std::function<Var(Tape&)>& build_out, double h = 1e-6);

// Plain-loop reference forward for any aggregator, train-mode batch norm,
// written independently of the tape ops.
Tensor oracle_layer_forward(const Tensor& h, const NeighborList& nbrs, const LayerParams& p);

// Full-sort nearest-neighbor reference: per vertex the m nearest others,
// ascending (distance, index).
std::vector<std::int32_t> oracle_sorted_neighbors(const Tensor& features, std::size_t m);

std::vector<CheckResult> check_gradients(unsigned long long seed);
std::vector<CheckResult> check_layers(unsigned long long seed);
std::vector<CheckResult> check_graph(unsigned long long seed);

bool all_pass(const std::vector<CheckResult>& results);

}  // namespace dgcn
