#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dgcn/model.hpp"
#include "dgcn/optim.hpp"

namespace dgcn {

// key = value lines, '#' comments, blank lines ignored.
struct KeyValues {
  std::vector<std::pair<std::string, std::string>> items;  // file order
  const std::string* find(const std::string& key) const;
  bool has(const std::string& key) const { return find(key) != nullptr; }
};

KeyValues parse_key_values(const std::string& text, const std::string& what);
KeyValues parse_key_values_file(const std::string& path);

struct RunSettings {
  AdamConfig adam;     // lr, decay-steps, decay-factor
  int batch_size = 4;
};

struct ParsedConfig {
  ModelConfig model;
  RunSettings run;
};

// Validates every key (unknown keys rejected, naming the key) and requires
// backbone, depth, width, k. dilation=off forces dmax=1; stochastic=off
// forces epsilon=0. num-classes / aux-dim keys are optional — normally they
// come from the dataset manifest, but checkpoint sidecars carry them.
ParsedConfig parse_run_config(const KeyValues& kv);

// Structure keys only (no trainer settings) — what the checkpoint sidecar stores.
std::string model_config_text(const ModelConfig& cfg);
ModelConfig parse_model_config_text(const std::string& text, const std::string& what);

}  // namespace dgcn
