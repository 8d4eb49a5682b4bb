#pragma once

#include <array>
#include <string>

#include "monfap/nn.hpp"

namespace monfap {

// Four-scale pyramid encoder. A stride-4 stem followed by three stride-2
// stages; levels have strides (4, 8, 16, 32) and channels (C, 2C, 4C, 8C).
struct Backbone {
  // Pre-activation residual block: x + conv3x3(gelu(norm(x))).
  struct Block {
    LayerNorm norm;
    Conv2dLayer conv;

    Block() = default;
    Block(ParamStore& ps, const std::string& name, int ch, Rng& rng);
    Tensor forward(const Tensor& x) const;
  };

  Conv2dLayer stem;  // 3 -> C, 4x4 stride 4
  LayerNorm stem_norm;
  std::array<Block, 2> stem_blocks;
  struct Stage {
    Conv2dLayer down;  // 2x2 stride 2, doubling channels
    std::array<Block, 2> blocks;
  };
  std::array<Stage, 3> stages;

  Backbone() = default;
  Backbone(ParamStore& ps, int c, Rng& rng);

  // image [3,H,W], H and W divisible by 32; throws std::invalid_argument otherwise
  std::array<Tensor, 4> forward(const Tensor& image) const;
};

}  // namespace monfap
