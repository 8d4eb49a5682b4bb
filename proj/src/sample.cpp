#include "monfap/sample.hpp"

#include <stdexcept>

namespace monfap {

std::vector<std::uint8_t> downsample_mask_nn(const std::vector<std::uint8_t>& mask,
                                             int H, int W, int h, int w) {
  if (h <= 0 || w <= 0 || H % h != 0 || W % w != 0)
    throw std::invalid_argument("downsample_mask_nn: " + std::to_string(H) + "x" +
                                std::to_string(W) + " -> " + std::to_string(h) +
                                "x" + std::to_string(w) + " is not integral");
  int sy = H / h, sx = W / w;
  std::vector<std::uint8_t> out(static_cast<size_t>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      out[static_cast<size_t>(i) * w + j] =
          mask[static_cast<size_t>(i) * sy * W + static_cast<size_t>(j) * sx];
  return out;
}

void flip_horizontal(Sample& s) {
  auto& img = s.image.value();
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < s.h; ++i) {
      Scalar* row = &img[(static_cast<size_t>(c) * s.h + i) * s.w];
      for (int j = 0; j < s.w / 2; ++j) std::swap(row[j], row[s.w - 1 - j]);
    }
  for (int i = 0; i < s.h; ++i) {
    std::uint8_t* row = &s.gt_mask[static_cast<size_t>(i) * s.w];
    for (int j = 0; j < s.w / 2; ++j) std::swap(row[j], row[s.w - 1 - j]);
  }
}

}  // namespace monfap
