#pragma once

#include <string>
#include <vector>

#include "dgcn/data.hpp"
#include "dgcn/metrics.hpp"
#include "dgcn/model.hpp"
#include "dgcn/optim.hpp"

namespace dgcn {

struct TrainSettings {
  int epochs = 100;
  int batch_size = 4;
  unsigned long long seed = 1;
  AdamConfig adam;
};

struct EpochStats {
  int epoch = 0;
  long step = 0;       // optimizer steps taken so far
  double lr = 0.0;     // effective rate after this epoch
  double loss = 0.0;   // mean over the epoch's blocks
  double train_oa = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> log;
  double final_loss = 0.0;
};

// Shuffled blocks in mini-batches, gradients averaged per batch, Adam with
// the step-decay schedule. Non-finite loss aborts with per-layer activation
// norms in the message.
TrainResult train(const ModelConfig& cfg, ModelParams& params, const Dataset& data,
                  const TrainSettings& settings);

Metrics evaluate(const ModelConfig& cfg, ModelParams& params, const Dataset& data,
                 ConfusionMatrix* confusion_out = nullptr);

// Eval-mode argmax labels for one cloud (ties -> lowest class id).
std::vector<int> predict_labels(const ModelConfig& cfg, ModelParams& params,
                                const PointCloud& cloud);

// "epoch,step,lr,loss,train_oa" rows; 17 significant digits so identical runs
// produce identical files.
std::string epoch_log_csv(const std::vector<EpochStats>& log);

}  // namespace dgcn
