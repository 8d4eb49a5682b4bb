#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "monfap/config.hpp"
#include "monfap/metrics.hpp"
#include "monfap/model.hpp"
#include "monfap/sample.hpp"

namespace monfap {

struct TrainResult {
  int iterations_run = 0;
  bool aborted_non_finite = false;  // checkpoint file keeps its last good state
  double final_loss = 0;
  std::string log;  // line-delimited iteration records
};

// Single-threaded loop: epoch shuffles come from the seed's "data" stream,
// horizontal-flip augmentation from "augment", gate noise from "gate", so the
// whole run is a pure function of (config, dataset, seed). Kernel constraint
// projections run after every optimizer step; checkpoints are written every
// train.checkpoint_every iterations and at the end, never after a non-finite
// loss.
TrainResult train_model(Model& model, const std::vector<Sample>& train_set,
                        const RunConfig& cfg, std::ostream* echo = nullptr);

struct EvalOptions {
  bool perturb = false;
  // Metric sanity hook: scores ground truth as if predictions were perfect,
  // bypassing the model. Loss fields stay absent.
  bool oracle = false;
};

MetricsReport evaluate_model(const Model& model, const std::vector<Sample>& samples,
                             const RunConfig& cfg, const EvalOptions& opts);

struct Prediction {
  double fake_probability = 0;
  std::vector<std::uint8_t> mask;  // h*w at input resolution
};

// Inference on an arbitrary-size image: reflect-pads each side to a multiple
// of 32 so every stride divides evenly, then crops the mask back. `rgb` is
// channel-major in [0,1].
Prediction predict_image(const Model& model, const std::vector<double>& rgb, int h,
                         int w);

}  // namespace monfap
