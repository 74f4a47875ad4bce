#pragma once

#include <vector>

namespace dgcn {

struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<long long> counts;  // row = true class, column = predicted

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes);

  void add(int truth, int predicted);
  long long at(int truth, int predicted) const;
  long long total() const;
};

struct Metrics {
  double overall_accuracy = 0.0;
  std::vector<double> per_class_iou;
  std::vector<bool> class_present;  // participated in the mean (T > 0 or P > 0)
  double mean_iou = 0.0;
};

// IoU_c = TP / (T + P - TP). Classes absent from both truth and prediction are
// excluded from the mean; T = 0 with P > 0 contributes 0.
Metrics compute_metrics(const ConfusionMatrix& cm);

}  // namespace dgcn
