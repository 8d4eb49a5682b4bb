#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monfap/tensor.hpp"

namespace monfap {

// One dataset record. Genuine samples have an all-zero mask; manipulated
// samples mark every tampered pixel.
struct Sample {
  Tensor image;                      // [3,H,W], values in [0,1]
  std::vector<std::uint8_t> gt_mask;  // H*W, values 0/1
  int h = 0, w = 0;
  int label = 0;  // 0 genuine, 1 manipulated
  std::uint64_t seed = 0;
  std::string image_path, mask_path;
};

// Nearest-neighbor downsample of a binary H x W mask to h x w (top-left
// convention; H, W must be exact multiples of h, w).
std::vector<std::uint8_t> downsample_mask_nn(const std::vector<std::uint8_t>& mask,
                                             int H, int W, int h, int w);

// In-place horizontal mirror of image and mask.
void flip_horizontal(Sample& s);

}  // namespace monfap
