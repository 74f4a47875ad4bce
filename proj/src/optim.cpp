#include "dgcn/optim.hpp"

#include <cmath>

#include "dgcn/errors.hpp"

namespace dgcn {

double effective_lr(const AdamConfig& cfg, long step) {
  require(cfg.decay_interval > 0, "adam: decay interval must be positive");
  const long drops = step / cfg.decay_interval;
  return cfg.base_lr * std::pow(cfg.decay_factor, static_cast<double>(drops));
}

void adam_step(const std::vector<Tensor*>& params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->numel(), 0.0);
      state.v[i].assign(params[i]->numel(), 0.0);
    }
  }
  require(state.m.size() == params.size(), "adam: parameter list changed between steps");

  ++state.step;
  const double lr = effective_lr(state.cfg, state.step);
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    require(state.m[i].size() == p.numel(), "adam: parameter size changed between steps");
    require(p.grad.size() == p.numel(), "adam: missing gradient for a parameter");
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const double g = p.grad[j];
      state.m[i][j] = b1 * state.m[i][j] + (1.0 - b1) * g;
      state.v[i][j] = b2 * state.v[i][j] + (1.0 - b2) * g * g;
      const double mhat = state.m[i][j] / c1;
      const double vhat = state.v[i][j] / c2;
      p.data[j] -= lr * mhat / std::sqrt(vhat + state.cfg.eps);
    }
  }
}

}  // namespace dgcn
