#pragma once

#include <string>

#include "dgcn/graph.hpp"
#include "dgcn/ops.hpp"

namespace dgcn {

enum class AggregatorKind { edgeconv, mrgcn, graphsage, graphsage_normalized, gin };

AggregatorKind aggregator_from_name(const std::string& name);
std::string aggregator_name(AggregatorKind kind);

// One graph-conv layer's learnables. `unit` is the (only or outer) MLP;
// graphsage adds an inner per-neighbor MLP, gin adds its learnable epsilon.
struct LayerParams {
  AggregatorKind kind = AggregatorKind::edgeconv;
  MlpUnitParams unit;
  MlpUnitParams inner;
  Tensor gin_eps;

  LayerParams() = default;
  LayerParams(AggregatorKind kind, std::size_t d_in, std::size_t d_out, Rng& rng);

  std::size_t in_dim() const;
  std::size_t out_dim() const { return unit.out_dim(); }
};

Var edgeconv_forward(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode);
Var mrgcn_forward(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode);
Var graphsage_forward(Var h, const NeighborList& nbrs, LayerParams& p, bool normalize,
                      Mode mode);
Var gin_forward(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode);

// Dispatch on p.kind.
Var layer_forward(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode);

// layer + h; the layer must preserve width.
Var residual_wrap(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode);

// concat(h, layer); width grows by the layer's out_dim.
Var dense_wrap(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode);

}  // namespace dgcn
