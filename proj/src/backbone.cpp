#include "monfap/backbone.hpp"

#include <stdexcept>

namespace monfap {

Backbone::Block::Block(ParamStore& ps, const std::string& name, int ch, Rng& rng)
    : norm(ps, name + ".norm", ch),
      conv(ps, name + ".conv", ch, ch, 3, 1, 1, /*with_bias=*/true, rng) {}

Tensor Backbone::Block::forward(const Tensor& x) const {
  return add(x, conv.forward(gelu(norm.channels(x))));
}

Backbone::Backbone(ParamStore& ps, int c, Rng& rng)
    : stem(ps, "backbone.stem", 3, c, 4, 4, 0, true, rng),
      stem_norm(ps, "backbone.stem_norm", c),
      stem_blocks{Block(ps, "backbone.l0.b0", c, rng),
                  Block(ps, "backbone.l0.b1", c, rng)} {
  for (int s = 0; s < 3; ++s) {
    int cin = c << s;
    std::string base = "backbone.l" + std::to_string(s + 1);
    stages[s].down =
        Conv2dLayer(ps, base + ".down", cin, cin * 2, 2, 2, 0, true, rng);
    stages[s].blocks = {Block(ps, base + ".b0", cin * 2, rng),
                        Block(ps, base + ".b1", cin * 2, rng)};
  }
}

std::array<Tensor, 4> Backbone::forward(const Tensor& image) const {
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw std::invalid_argument("backbone: expected [3,H,W] image, got " +
                                shape_str(image.shape()));
  int h = image.dim(1), w = image.dim(2);
  if (h % 32 != 0 || w % 32 != 0 || h < 32 || w < 32)
    throw std::invalid_argument("backbone: H and W must be divisible by 32, got " +
                                std::to_string(h) + "x" + std::to_string(w));

  Tensor x = stem_norm.channels(stem.forward(image));
  for (const auto& b : stem_blocks) x = b.forward(x);

  std::array<Tensor, 4> levels;
  levels[0] = x;
  for (int s = 0; s < 3; ++s) {
    x = stages[s].down.forward(x);
    for (const auto& b : stages[s].blocks) x = b.forward(x);
    levels[s + 1] = x;
  }
  return levels;
}

}  // namespace monfap
