#include "dgcn/layers.hpp"

#include "dgcn/errors.hpp"

namespace dgcn {

AggregatorKind aggregator_from_name(const std::string& name) {
  if (name == "edgeconv") return AggregatorKind::edgeconv;
  if (name == "mrgcn") return AggregatorKind::mrgcn;
  if (name == "graphsage") return AggregatorKind::graphsage;
  if (name == "graphsage-normalized") return AggregatorKind::graphsage_normalized;
  if (name == "gin") return AggregatorKind::gin;
  throw ContractError("unknown aggregator '" + name +
                      "' (expected edgeconv|mrgcn|graphsage|graphsage-normalized|gin)");
}

std::string aggregator_name(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::edgeconv: return "edgeconv";
    case AggregatorKind::mrgcn: return "mrgcn";
    case AggregatorKind::graphsage: return "graphsage";
    case AggregatorKind::graphsage_normalized: return "graphsage-normalized";
    case AggregatorKind::gin: return "gin";
  }
  throw ContractError("unknown aggregator kind");
}

LayerParams::LayerParams(AggregatorKind kind_, std::size_t d_in, std::size_t d_out, Rng& rng)
    : kind(kind_) {
  switch (kind) {
    case AggregatorKind::edgeconv:
    case AggregatorKind::mrgcn:
      unit = MlpUnitParams(2 * d_in, d_out, rng);
      break;
    case AggregatorKind::graphsage:
    case AggregatorKind::graphsage_normalized:
      inner = MlpUnitParams(d_in, d_out, rng);
      unit = MlpUnitParams(d_in + d_out, d_out, rng);
      break;
    case AggregatorKind::gin:
      unit = MlpUnitParams(d_in, d_out, rng);
      gin_eps = Tensor::scalar(0.0);
      break;
  }
}

std::size_t LayerParams::in_dim() const {
  switch (kind) {
    case AggregatorKind::edgeconv:
    case AggregatorKind::mrgcn: return unit.in_dim() / 2;
    case AggregatorKind::graphsage:
    case AggregatorKind::graphsage_normalized: return inner.in_dim();
    case AggregatorKind::gin: return unit.in_dim();
  }
  throw ContractError("unknown aggregator kind");
}

namespace {

void check_layer_input(Var h, const NeighborList& nbrs, const LayerParams& p) {
  const Tensor& hv = h.value();
  require(hv.ndim() == 2, "layer: features must be 2-D, got " + hv.shape_str());
  require(nbrs.size() == hv.dim(0),
          "layer: neighbor list covers " + std::to_string(nbrs.size()) + " vertices, features " +
              hv.shape_str());
  require(hv.dim(1) == p.in_dim(), "layer: features " + hv.shape_str() + " do not match " +
                                       std::to_string(p.in_dim()) + " input channels");
}

}  // namespace

Var edgeconv_forward(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode) {
  check_layer_input(h, nbrs, p);
  Var nb = gather_neighbors(h, nbrs.indices, nbrs.k);
  Var z = concat_center(h, sub_center(nb, h));
  Var e = mlp_unit(z, p.unit, Activation::relu, mode);  // per-edge MLP, then max
  return max_reduce_neighbors(e);
}

Var mrgcn_forward(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode) {
  check_layer_input(h, nbrs, p);
  Var nb = gather_neighbors(h, nbrs.indices, nbrs.k);
  Var m = max_reduce_neighbors(sub_center(nb, h));  // aggregate first: one MLP total
  return mlp_unit(concat_features(h, m), p.unit, Activation::relu, mode);
}

Var graphsage_forward(Var h, const NeighborList& nbrs, LayerParams& p, bool normalize,
                      Mode mode) {
  check_layer_input(h, nbrs, p);
  Var nb = gather_neighbors(h, nbrs.indices, nbrs.k);
  Var a = max_reduce_neighbors(mlp_unit(nb, p.inner, Activation::relu, mode));
  Var y = mlp_unit(concat_features(h, a), p.unit, Activation::relu, mode);
  return normalize ? row_l2_normalize(y) : y;
}

Var gin_forward(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode) {
  check_layer_input(h, nbrs, p);
  Tape& t = *h.tape;
  Var nb = gather_neighbors(h, nbrs.indices, nbrs.k);
  Var z = add(scale_by_scalar(h, t.param(p.gin_eps), 1.0), sum_neighbors(nb));
  return mlp_unit(z, p.unit, Activation::relu, mode);
}

Var layer_forward(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode) {
  switch (p.kind) {
    case AggregatorKind::edgeconv: return edgeconv_forward(h, nbrs, p, mode);
    case AggregatorKind::mrgcn: return mrgcn_forward(h, nbrs, p, mode);
    case AggregatorKind::graphsage: return graphsage_forward(h, nbrs, p, false, mode);
    case AggregatorKind::graphsage_normalized:
      return graphsage_forward(h, nbrs, p, true, mode);
    case AggregatorKind::gin: return gin_forward(h, nbrs, p, mode);
  }
  throw ContractError("unknown aggregator kind");
}

Var residual_wrap(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode) {
  const std::size_t din = h.value().channels();
  if (p.out_dim() != din)
    throw ContractError("residual shape: layer maps " + std::to_string(p.in_dim()) + " -> " +
                        std::to_string(p.out_dim()) + " channels, identity needs " +
                        std::to_string(din) + " -> " + std::to_string(din));
  return add(layer_forward(h, nbrs, p, mode), h);
}

Var dense_wrap(Var h, const NeighborList& nbrs, LayerParams& p, Mode mode) {
  return concat_features(h, layer_forward(h, nbrs, p, mode));
}

}  // namespace dgcn
