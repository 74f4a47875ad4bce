#pragma once

#include <cstdint>
#include <vector>

#include "dgcn/rng.hpp"
#include "dgcn/tape.hpp"

namespace dgcn {

// Per-feature affine normalization state. gamma/beta are learnable; the
// running statistics feed eval-mode normalization only.
struct BatchNormState {
  Tensor gamma;          // [C], init 1
  Tensor beta;           // [C], init 0
  std::vector<double> running_mean;  // [C], init 0
  std::vector<double> running_var;   // [C], init 1
  double momentum = 0.9;
  double eps = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels);
  std::size_t channels() const { return gamma.numel(); }
};

enum class Activation { relu, none };

// Tape ops. Tensors are treated as (rows x channels) over the last axis, so
// the same kernels serve [N,D] and [N,k,D] inputs.

Var affine(Var x, Var w, Var b);
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& bn, Mode mode);
Var relu(Var x);
Var concat_features(Var a, Var b);            // [N,Da],[N,Db] -> [N,Da+Db]
Var concat_many(const std::vector<Var>& xs);  // column-wise over 2-D inputs
Var gather_neighbors(Var h, const std::vector<std::int32_t>& indices, std::size_t k);
Var sub_center(Var neighbors, Var h);         // [N,k,D] - broadcast [N,D]
Var concat_center(Var h, Var rel);            // [N,D],[N,k,Dr] -> [N,k,D+Dr]
Var max_reduce_neighbors(Var x, std::vector<std::int32_t>* argmax_out = nullptr);
Var sum_neighbors(Var x);                     // [N,k,D] -> [N,D]
Var add(Var a, Var b);
Var scale_by_scalar(Var x, Var s, double offset);  // (offset + s[0]) * x
Var row_l2_normalize(Var x, double min_norm = 1e-12);
Var dropout(Var x, double rate, Mode mode, Rng& rng);
Var global_max_rows(Var x);                   // [N,D] -> [1,D]
Var broadcast_concat_rows(Var x, Var g);      // [N,C1],[1,C2] -> [N,C1+C2]
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);
Var sum_all(Var x);                           // scalar; test/loss helper

// affine -> batch norm -> activation, the unit every layer is built from.
struct MlpUnitParams {
  Tensor w;  // [Din x Dout]
  Tensor b;  // [Dout]
  BatchNormState bn;

  MlpUnitParams() = default;
  MlpUnitParams(std::size_t d_in, std::size_t d_out, Rng& rng);
  std::size_t in_dim() const { return w.dim(0); }
  std::size_t out_dim() const { return w.dim(1); }
};

Var mlp_unit(Var x, Var w, Var b, BatchNormState& bn, Var gamma, Var beta, Activation act,
             Mode mode);
// Convenience overload registering the unit's tensors as tape parameters.
Var mlp_unit(Var x, MlpUnitParams& p, Activation act, Mode mode);

}  // namespace dgcn
