#pragma once

#include <array>
#include <string>
#include <utility>

#include "monfap/fat.hpp"
#include "monfap/nn.hpp"

namespace monfap {

// Unified predictor: four transformer stages walk the pyramid coarse to fine
// (strides 32, 16, 8, 4) with noise-enhanced features; each stage derives its
// attention mask from an auxiliary localizer head. The two learnable tokens
// shrink with the feature width (8C -> 4C -> 2C -> C) and finally emit the
// image-level logits and the two-channel mask logits.

struct AuxLocalization {
  Tensor logits;  // [1,h,w]
  AttentionMask mask;
};

// 1x1 conv -> sigmoid -> threshold (>= rule). The binary mask carries no
// gradient; the raw logits feed the auxiliary loss.
AuxLocalization aux_localize(const Tensor& features, const Conv2dLayer& head,
                             Scalar threshold);

// Fixed 2D sine/cosine positional encoding, [d,h,w]. Off by default in the
// model; kept for the config switch.
Tensor positional_encoding_2d(int d, int h, int w);

struct FupOutput {
  Tensor y;  // [2] image-level logits
  Tensor m;  // [2,H/4,W/4] mask logits
  std::array<Tensor, 4> aux_logits;
  int empty_mask_fallbacks = 0;
};

struct FupModule {
  Tensor tokens0;  // [2,8C] learnable
  std::array<FatStage, 4> stages;
  std::array<LinearLayer, 3> token_proj;  // width halving between stages
  std::array<Conv2dLayer, 3> up_proj;     // 1x1 conv, channel halving
  std::array<Conv2dLayer, 4> aux_head;    // 1x1 conv to 1 channel
  LinearLayer head_fc1, head_fc2;         // token-mean MLP to 2 logits
  Scalar mask_threshold = 0.5;
  bool positional_encoding = false;

  FupModule() = default;
  FupModule(ParamStore& ps, int c, Scalar mask_threshold, bool positional_encoding,
            Rng& rng, int heads_override = 0);

  // pyramid and noise are the four backbone levels and their same-shaped
  // noise maps (noise may be all-zero).
  FupOutput forward(const std::array<Tensor, 4>& pyramid,
                    const std::array<Tensor, 4>& noise) const;
};

}  // namespace monfap
