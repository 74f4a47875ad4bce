#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dgcn/layers.hpp"

namespace dgcn {

enum class BackboneKind { plain, residual, dense };

BackboneKind backbone_from_name(const std::string& name);
std::string backbone_name(BackboneKind kind);

struct ModelConfig {
  BackboneKind backbone = BackboneKind::residual;
  AggregatorKind aggregator = AggregatorKind::edgeconv;
  int depth = 28;
  int width = 64;
  int k = 16;
  int d_max = 16;
  double epsilon = 0.2;
  bool dynamic_edges = true;
  double dropout = 0.3;
  int num_classes = 0;  // supplied by the dataset manifest
  int input_aux_dim = 0;
  int fusion_width = 1024;
  int pred_width1 = 512;
  int pred_width2 = 256;

  std::size_t input_dim() const { return static_cast<std::size_t>(3 + input_aux_dim); }
  void validate() const;
};

// Stem changes width (3+C -> D); the remaining depth-1 layers keep width D
// (plain/residual) or grow it by D per layer (dense).
struct ModelParams {
  LayerParams stem;
  std::vector<LayerParams> layers;
  MlpUnitParams fusion;
  MlpUnitParams pred1, pred2, pred3;
};

ModelParams init_params(const ModelConfig& cfg, Rng& rng);

// Stable-named traversal of every learnable tensor, in a fixed order.
void visit_params(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn);

// Batch-norm running buffers: not learnable, but part of a checkpoint since
// eval-mode outputs depend on them.
void visit_bn_buffers(ModelParams& p,
                      const std::function<void(const std::string&, std::vector<double>&)>& fn);

std::size_t param_count(ModelParams& p);
std::vector<Tensor*> param_tensors(ModelParams& p);

// d = min(l+1, d_max) for 0-based layer index l.
int dilation_schedule(int layer_index, int d_max);

struct ForwardTrace {
  // What fusion consumes: full layer-1 output, then (dense) each layer's newly
  // produced channels or (plain/residual) each layer's full output.
  std::vector<Var> layer_features;
  Var fused;
  Var logits;
};

ForwardTrace backbone_forward(Tape& t, const PointCloud& cloud, const ModelConfig& cfg,
                              ModelParams& params, Mode mode, Rng& rng);
Var fusion_forward(const std::vector<Var>& trace, ModelParams& params, Mode mode);
Var prediction_forward(Var fused, const ModelConfig& cfg, ModelParams& params, Mode mode,
                       Rng& rng);
ForwardTrace model_forward(Tape& t, const PointCloud& cloud, const ModelConfig& cfg,
                           ModelParams& params, Mode mode, Rng& rng);

}  // namespace dgcn
