#pragma once

#include <vector>

#include "rf/nn/graph.hpp"

namespace rf::train {

/// Linear warmup to `initial_lr` over `warmup_steps`, then cosine annealing
/// to `eta_min` at `total_steps`. Throws StepOutOfRange unless
/// 0 <= step <= total_steps.
double lr_schedule(long step, long total_steps, double initial_lr, double eta_min, long warmup_steps);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  /// true: p -= lr * wd * p outside the moment estimates (AdamW).
  /// false: wd * p is added to the gradient (classic L2).
  bool decoupled = true;
};

/// Adam over a fixed parameter list, reading Parameter::grad.
class Adam {
 public:
  Adam(std::vector<nn::Parameter*> params, AdamConfig cfg);

  /// One update with learning rate `lr`. Throws ShapeMismatch if a gradient
  /// does not match its parameter.
  void step(double lr);
  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<nn::Parameter*> params_;
  std::vector<nn::Matrix> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace rf::train
