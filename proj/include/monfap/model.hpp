#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "monfap/backbone.hpp"
#include "monfap/fup.hpp"
#include "monfap/mone.hpp"

namespace monfap {

struct ModelConfig {
  int c = 16;                     // pyramid channel base
  int k = 4;                      // gate top-k
  Scalar w_im = 0.1;              // importance loss scale
  Scalar theta = 0.7;             // central-difference mixing
  Scalar mask_threshold = 0.5;    // aux mask binarization
  int heads = 0;                  // attention heads; 0 derives from width
  bool use_mnm = true;            // false: noise pyramid replaced by zeros
  bool positional_encoding = false;
};

// Full detector: pyramid encoder -> per-level noise mixtures -> unified
// predictor. Parameters are registered in a flat store for the optimizer and
// checkpointing; construction consumes a seeded init stream so identical
// (config, seed) pairs build bit-identical models.
struct Model {
  ModelConfig cfg;
  ParamStore params;
  Backbone backbone;
  MnmModule mnm;
  FupModule fup;

  Model(const ModelConfig& cfg, std::uint64_t seed);

  struct Forward {
    Tensor y;  // [2]
    Tensor m;  // [2,H/4,W/4]
    std::array<Tensor, 4> aux_logits;
    std::vector<GateDecision> decisions;  // one per level; empty without MNM
    int empty_mask_fallbacks = 0;
  };
  // gate_rng feeds the gate noise; it is only drawn from when training.
  Forward forward(const Tensor& image, bool training, Rng& gate_rng) const;

  // Re-imposes the HF zero-sum and constrained-kernel rules after an
  // optimizer step. Returns the number of degenerate kernels reinitialized.
  int apply_projections();
};

}  // namespace monfap
