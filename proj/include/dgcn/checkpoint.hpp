#pragma once

#include <string>

#include "dgcn/model.hpp"

namespace dgcn {

// Plain-text weights: header "DGKPT v1 <record-count>", then one record per
// tensor: name<TAB>dims d1 d2 ...<TAB>values v1 v2 ... (row-major, 17
// significant digits). Records cover learnable parameters plus batch-norm
// running buffers. Alongside the weights, save_checkpoint writes <path>.cfg
// with the model structure so eval can rebuild the network.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, ModelParams& params);

// Overwrites the tensors of an already-constructed `params` whose structure
// must match the file (same record names and dims).
void load_checkpoint(const std::string& path, ModelParams& params);

// Reads <path>.cfg back into a ModelConfig.
ModelConfig load_checkpoint_config(const std::string& path);

}  // namespace dgcn
