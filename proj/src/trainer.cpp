#include "dgcn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dgcn/errors.hpp"
#include "dgcn/ops.hpp"

namespace dgcn {
namespace {

int argmax_row(const Tensor& t, size_t row) {
  int best = 0;
  for (size_t c = 1; c < t.channels(); ++c)
    if (t.at(row, c) > t.at(row, best)) best = static_cast<int>(c);
  return best;
}

// largest |activation| per backbone layer, for NaN diagnostics
std::string layer_norms(const ForwardTrace& trace) {
  std::ostringstream os;
  for (size_t l = 0; l < trace.layer_features.size(); ++l) {
    const Tensor& t = trace.layer_features[l].value();
    double m = 0.0;
    for (double v : t.data) m = std::max(m, std::fabs(v));
    os << (l ? ", " : "") << "layer" << (l + 1) << "=" << m;
  }
  return os.str();
}

void check_dataset(const ModelConfig& cfg, const Dataset& data) {
  require(!data.blocks.empty(), "dataset has no blocks");
  require(cfg.num_classes == data.num_classes,
          "model expects " + std::to_string(cfg.num_classes) + " classes, dataset has " +
              std::to_string(data.num_classes));
  for (const PointCloud& b : data.blocks) {
    int aux = b.aux.numel() == 0 ? 0 : static_cast<int>(b.aux.dim(1));
    require(aux == cfg.input_aux_dim, "model expects " + std::to_string(cfg.input_aux_dim) +
                                          " auxiliary features, block has " + std::to_string(aux));
  }
}

}  // namespace

TrainResult train(const ModelConfig& cfg, ModelParams& params, const Dataset& data,
                  const TrainSettings& settings) {
  cfg.validate();
  check_dataset(cfg, data);
  require(settings.epochs >= 1, "epochs must be >= 1");
  require(settings.batch_size >= 1, "batch-size must be >= 1");

  std::vector<Tensor*> learnables = param_tensors(params);
  AdamState opt(settings.adam);
  Rng rng(mix_seed(settings.seed, 0x7a41u));

  const int nblocks = static_cast<int>(data.blocks.size());
  std::vector<int> order(nblocks);
  for (int i = 0; i < nblocks; ++i) order[i] = i;

  TrainResult result;
  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    shuffle_vec(order, rng);

    double loss_sum = 0.0;
    long long correct = 0, seen = 0;
    for (int start = 0; start < nblocks; start += settings.batch_size) {
      const int batch = std::min(settings.batch_size, nblocks - start);
      for (Tensor* p : learnables) p->zero_grad();

      for (int j = 0; j < batch; ++j) {
        const PointCloud& block = data.blocks[order[start + j]];
        Tape t;
        ForwardTrace trace = model_forward(t, block, cfg, params, Mode::train, rng);
        Var loss = softmax_cross_entropy(trace.logits, block.labels);
        double lval = loss.value().data[0];
        if (!std::isfinite(lval))
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + " block " +
                             std::to_string(order[start + j]) + "; max |activation| per layer: " +
                             layer_norms(trace));
        loss_sum += lval;

        const Tensor& logits = trace.logits.value();
        for (size_t r = 0; r < logits.rows(); ++r) {
          if (argmax_row(logits, r) == block.labels[r]) correct++;
          seen++;
        }
        t.backward(loss);
      }

      if (batch > 1) {
        const double inv = 1.0 / batch;
        for (Tensor* p : learnables)
          for (double& g : p->grad) g *= inv;
      }
      adam_step(learnables, opt);
    }

    EpochStats st;
    st.epoch = epoch + 1;
    st.step = opt.step;
    st.lr = effective_lr(settings.adam, opt.step);
    st.loss = loss_sum / nblocks;
    st.train_oa = seen > 0 ? static_cast<double>(correct) / seen : 0.0;
    result.log.push_back(st);
    result.final_loss = st.loss;
  }
  return result;
}

Metrics evaluate(const ModelConfig& cfg, ModelParams& params, const Dataset& data,
                 ConfusionMatrix* confusion_out) {
  cfg.validate();
  check_dataset(cfg, data);

  ConfusionMatrix cm(cfg.num_classes);
  Rng rng(0);  // untouched: eval mode draws nothing
  for (const PointCloud& block : data.blocks) {
    Tape t;
    ForwardTrace trace = model_forward(t, block, cfg, params, Mode::eval, rng);
    const Tensor& logits = trace.logits.value();
    if (!logits.all_finite()) throw NumericError("non-finite logits during evaluation");
    for (size_t r = 0; r < logits.rows(); ++r)
      cm.add(block.labels[r], argmax_row(logits, r));
  }
  if (confusion_out) *confusion_out = cm;
  return compute_metrics(cm);
}

std::vector<int> predict_labels(const ModelConfig& cfg, ModelParams& params,
                                const PointCloud& cloud) {
  cfg.validate();
  Tape t;
  Rng rng(0);
  ForwardTrace trace = model_forward(t, cloud, cfg, params, Mode::eval, rng);
  const Tensor& logits = trace.logits.value();
  std::vector<int> out(logits.rows());
  for (size_t r = 0; r < logits.rows(); ++r) out[r] = argmax_row(logits, r);
  return out;
}

std::string epoch_log_csv(const std::vector<EpochStats>& log) {
  std::ostringstream os;
  os << "epoch,step,lr,loss,train_oa\n";
  char buf[64];
  for (const EpochStats& st : log) {
    os << st.epoch << "," << st.step << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", st.lr);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", st.loss);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", st.train_oa);
    os << buf << "\n";
  }
  return os.str();
}

}  // namespace dgcn
