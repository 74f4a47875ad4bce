#pragma once

#include <array>
#include <string>
#include <vector>

#include "dgcn/graph.hpp"

namespace dgcn {

struct Dataset {
  std::vector<PointCloud> blocks;
  int num_classes = 0;
  std::string split = "train";
};

// Labeled geometric primitives scattered in the unit cube: Gaussian clusters,
// thin axis-aligned planes, and thin bars. Class identity is tied to a corner
// anchor plus the primitive shape, so local geometry predicts the label.
struct SynthSpec {
  int num_blocks = 8;
  int points_per_block = 512;
  int num_classes = 4;
  std::array<double, 3> shape_mix{0.34, 0.33, 0.33};  // clusters, planes, bars
  double noise_sigma = 0.01;
  unsigned long long seed = 1;
  std::string split = "train";
};

Dataset synth_dataset(const SynthSpec& spec);

// Text block file: header "PCSEG v1 N C L", then N rows "x y z [f1..fC] label".
void save_point_file(const PointCloud& cloud, int num_classes, const std::string& path);
PointCloud load_point_file(const std::string& path, int* num_classes_out = nullptr);

// Manifest "PCDS v1 num-classes split" followed by one block path per line
// (relative paths resolve against the manifest's directory).
// save_dataset writes block files plus the manifest into dir, returns the
// manifest path.
std::string save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& manifest_path);

}  // namespace dgcn
