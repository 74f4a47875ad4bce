#include "dgcn/model.hpp"

#include <algorithm>

#include "dgcn/errors.hpp"

namespace dgcn {

BackboneKind backbone_from_name(const std::string& name) {
  if (name == "plain") return BackboneKind::plain;
  if (name == "residual") return BackboneKind::residual;
  if (name == "dense") return BackboneKind::dense;
  throw ContractError("unknown backbone '" + name + "' (expected plain|residual|dense)");
}

std::string backbone_name(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::plain: return "plain";
    case BackboneKind::residual: return "residual";
    case BackboneKind::dense: return "dense";
  }
  throw ContractError("unknown backbone kind");
}

void ModelConfig::validate() const {
  require(depth >= 1, "config: depth must be >= 1");
  require(width >= 1, "config: width must be >= 1");
  require(k >= 1, "config: k must be >= 1");
  require(d_max >= 1, "config: dmax must be >= 1");
  require(epsilon >= 0.0 && epsilon <= 1.0, "config: epsilon must lie in [0,1]");
  require(dropout >= 0.0 && dropout < 1.0, "config: dropout must lie in [0,1)");
  require(num_classes >= 1, "config: num-classes must be >= 1");
  require(input_aux_dim >= 0, "config: aux dim must be >= 0");
  require(fusion_width >= 1 && pred_width1 >= 1 && pred_width2 >= 1,
          "config: head widths must be >= 1");
}

namespace {

std::size_t trace_concat_width(const ModelConfig& cfg) {
  const std::size_t d = static_cast<std::size_t>(cfg.width);
  const std::size_t l = static_cast<std::size_t>(cfg.depth);
  return cfg.backbone == BackboneKind::dense ? cfg.input_dim() + d * l : d * l;
}

void visit_unit(const std::string& prefix, MlpUnitParams& u,
                const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".w", u.w);
  fn(prefix + ".b", u.b);
  fn(prefix + ".bn.gamma", u.bn.gamma);
  fn(prefix + ".bn.beta", u.bn.beta);
}

void visit_layer(const std::string& prefix, LayerParams& l,
                 const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_unit(prefix + ".unit", l.unit, fn);
  if (l.kind == AggregatorKind::graphsage || l.kind == AggregatorKind::graphsage_normalized)
    visit_unit(prefix + ".inner", l.inner, fn);
  if (l.kind == AggregatorKind::gin) fn(prefix + ".gin_eps", l.gin_eps);
}

void validate_params(const ModelConfig& cfg, const ModelParams& p) {
  cfg.validate();
  require(p.layers.size() == static_cast<std::size_t>(cfg.depth) - 1,
          "model: params hold " + std::to_string(p.layers.size() + 1) + " layers, config wants " +
              std::to_string(cfg.depth));
  require(p.stem.in_dim() == cfg.input_dim() &&
              p.stem.out_dim() == static_cast<std::size_t>(cfg.width),
          "model: stem dims do not match config");
  require(p.pred3.out_dim() == static_cast<std::size_t>(cfg.num_classes),
          "model: head outputs " + std::to_string(p.pred3.out_dim()) + " classes, config wants " +
              std::to_string(cfg.num_classes));
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d0 = cfg.input_dim();
  const std::size_t d = static_cast<std::size_t>(cfg.width);

  ModelParams p;
  p.stem = LayerParams(cfg.aggregator, d0, d, rng);
  p.layers.reserve(static_cast<std::size_t>(cfg.depth) - 1);
  for (int l = 1; l < cfg.depth; ++l) {
    const std::size_t din =
        cfg.backbone == BackboneKind::dense ? d0 + d * static_cast<std::size_t>(l) : d;
    p.layers.emplace_back(cfg.aggregator, din, d, rng);
  }
  const std::size_t concat_w = trace_concat_width(cfg);
  p.fusion = MlpUnitParams(concat_w, static_cast<std::size_t>(cfg.fusion_width), rng);
  p.pred1 = MlpUnitParams(concat_w + static_cast<std::size_t>(cfg.fusion_width),
                          static_cast<std::size_t>(cfg.pred_width1), rng);
  p.pred2 = MlpUnitParams(static_cast<std::size_t>(cfg.pred_width1),
                          static_cast<std::size_t>(cfg.pred_width2), rng);
  p.pred3 = MlpUnitParams(static_cast<std::size_t>(cfg.pred_width2),
                          static_cast<std::size_t>(cfg.num_classes), rng);
  return p;
}

void visit_params(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_layer("stem", p.stem, fn);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    visit_layer("layer" + std::to_string(l + 2), p.layers[l], fn);
  visit_unit("fusion", p.fusion, fn);
  visit_unit("pred1", p.pred1, fn);
  visit_unit("pred2", p.pred2, fn);
  visit_unit("pred3", p.pred3, fn);
}

void visit_bn_buffers(ModelParams& p,
                      const std::function<void(const std::string&, std::vector<double>&)>& fn) {
  auto unit = [&](const std::string& prefix, MlpUnitParams& u) {
    fn(prefix + ".bn.running_mean", u.bn.running_mean);
    fn(prefix + ".bn.running_var", u.bn.running_var);
  };
  auto layer = [&](const std::string& prefix, LayerParams& l) {
    unit(prefix + ".unit", l.unit);
    if (l.kind == AggregatorKind::graphsage || l.kind == AggregatorKind::graphsage_normalized)
      unit(prefix + ".inner", l.inner);
  };
  layer("stem", p.stem);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    layer("layer" + std::to_string(l + 2), p.layers[l]);
  unit("fusion", p.fusion);
  unit("pred1", p.pred1);
  unit("pred2", p.pred2);
  unit("pred3", p.pred3);
}

std::size_t param_count(ModelParams& p) {
  std::size_t count = 0;
  visit_params(p, [&](const std::string&, Tensor& t) { count += t.numel(); });
  return count;
}

std::vector<Tensor*> param_tensors(ModelParams& p) {
  std::vector<Tensor*> out;
  visit_params(p, [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

int dilation_schedule(int layer_index, int d_max) {
  require(layer_index >= 0 && d_max >= 1, "dilation schedule: bad arguments");
  return std::min(layer_index + 1, d_max);
}

ForwardTrace backbone_forward(Tape& t, const PointCloud& cloud, const ModelConfig& cfg,
                              ModelParams& params, Mode mode, Rng& rng) {
  validate_params(cfg, params);
  require(cloud.size() >= 2, "model: need at least 2 points");
  require(cloud.aux.numel() == 0 || cloud.aux.dim(1) == static_cast<std::size_t>(cfg.input_aux_dim),
          "model: cloud aux width does not match config");
  const std::size_t n = cloud.size();

  Tensor x0({n, cfg.input_dim()});
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t c = 0; c < 3; ++c) x0.at(v, c) = cloud.coords.at(v, c);
    for (std::size_t c = 0; c < static_cast<std::size_t>(cfg.input_aux_dim); ++c)
      x0.at(v, 3 + c) = cloud.aux.at(v, c);
  }
  Var h = t.input(std::move(x0));

  DilationSpec spec0{dilation_schedule(0, cfg.d_max), cfg.epsilon, mode};
  const NeighborList graph0 = build_input_graph(cloud, cfg.k, spec0, rng);

  ForwardTrace trace;
  trace.layer_features.reserve(static_cast<std::size_t>(cfg.depth));
  if (cfg.backbone == BackboneKind::dense) {
    h = dense_wrap(h, graph0, params.stem, mode);
  } else {
    h = layer_forward(h, graph0, params.stem, mode);  // width-changing stem: no shortcut
  }
  trace.layer_features.push_back(h);

  for (int l = 1; l < cfg.depth; ++l) {
    NeighborList graph;
    if (cfg.dynamic_edges) {
      DilationSpec spec{dilation_schedule(l, cfg.d_max), cfg.epsilon, mode};
      graph = stochastic_dilated_knn(t.value(h), cfg.k, spec, rng);
    } else {
      graph = graph0;
    }
    LayerParams& lp = params.layers[static_cast<std::size_t>(l) - 1];
    switch (cfg.backbone) {
      case BackboneKind::plain:
        h = layer_forward(h, graph, lp, mode);
        trace.layer_features.push_back(h);
        break;
      case BackboneKind::residual:
        h = residual_wrap(h, graph, lp, mode);
        trace.layer_features.push_back(h);
        break;
      case BackboneKind::dense: {
        Var fresh = layer_forward(h, graph, lp, mode);  // only the new channels feed fusion
        trace.layer_features.push_back(fresh);
        h = concat_features(h, fresh);
        break;
      }
    }
  }
  return trace;
}

Var fusion_forward(const std::vector<Var>& trace, ModelParams& params, Mode mode) {
  require(!trace.empty(), "fusion: empty trace");
  Var local = concat_many(trace);
  Var z = mlp_unit(local, params.fusion, Activation::relu, mode);
  return broadcast_concat_rows(local, global_max_rows(z));
}

Var prediction_forward(Var fused, const ModelConfig& cfg, ModelParams& params, Mode mode,
                       Rng& rng) {
  Var h = mlp_unit(fused, params.pred1, Activation::relu, mode);
  h = mlp_unit(h, params.pred2, Activation::relu, mode);
  h = dropout(h, cfg.dropout, mode, rng);
  return mlp_unit(h, params.pred3, Activation::none, mode);
}

ForwardTrace model_forward(Tape& t, const PointCloud& cloud, const ModelConfig& cfg,
                           ModelParams& params, Mode mode, Rng& rng) {
  ForwardTrace trace = backbone_forward(t, cloud, cfg, params, mode, rng);
  trace.fused = fusion_forward(trace.layer_features, params, mode);
  trace.logits = prediction_forward(trace.fused, cfg, params, mode, rng);
  return trace;
}

}  // namespace dgcn
