#pragma once

#include <vector>

#include "monfap/nn.hpp"

namespace monfap {

struct OptimConfig {
  double lr = 0.00006;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled, scaled by the scheduled lr
  double poly_power = 0.9;
  int total_iterations = 500;
};

// Adam with decoupled weight decay and a polynomial learning-rate schedule.
// Moment buffers are addressed by parameter order, which is fixed at
// construction.
class AdamW {
 public:
  AdamW(ParamStore& params, const OptimConfig& cfg);

  // base_lr * (1 - iter/total)^power, clamped at 0.
  double lr_at(int iter) const;

  // Applies one update from the accumulated gradients; missing gradients count
  // as zero. iter indexes the schedule.
  void step(int iter);

 private:
  ParamStore* params_;
  OptimConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace monfap
