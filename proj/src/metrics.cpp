#include "dgcn/metrics.hpp"

#include "dgcn/errors.hpp"

namespace dgcn {

ConfusionMatrix::ConfusionMatrix(int classes) : num_classes(classes) {
  require(classes >= 1, "confusion matrix needs at least one class");
  counts.assign(static_cast<size_t>(classes) * classes, 0);
}

void ConfusionMatrix::add(int truth, int predicted) {
  require(truth >= 0 && truth < num_classes, "true label out of range");
  require(predicted >= 0 && predicted < num_classes, "predicted label out of range");
  counts[static_cast<size_t>(truth) * num_classes + predicted]++;
}

long long ConfusionMatrix::at(int truth, int predicted) const {
  return counts[static_cast<size_t>(truth) * num_classes + predicted];
}

long long ConfusionMatrix::total() const {
  long long s = 0;
  for (long long c : counts) s += c;
  return s;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  require(cm.num_classes >= 1, "empty confusion matrix");
  const long long n = cm.total();
  require(n > 0, "no samples in confusion matrix");

  Metrics m;
  m.per_class_iou.assign(cm.num_classes, 0.0);
  m.class_present.assign(cm.num_classes, false);

  long long diag = 0;
  double iou_sum = 0.0;
  int participating = 0;
  for (int c = 0; c < cm.num_classes; ++c) {
    long long tp = cm.at(c, c);
    long long t = 0, p = 0;
    for (int j = 0; j < cm.num_classes; ++j) {
      t += cm.at(c, j);
      p += cm.at(j, c);
    }
    diag += tp;
    long long uni = t + p - tp;
    if (uni > 0) {
      m.per_class_iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
      m.class_present[c] = true;
      iou_sum += m.per_class_iou[c];
      participating++;
    }
    // t == 0 && p == 0: class never appears, leave it out of the mean
  }
  m.overall_accuracy = static_cast<double>(diag) / static_cast<double>(n);
  m.mean_iou = participating > 0 ? iou_sum / participating : 0.0;
  return m;
}

}  // namespace dgcn
