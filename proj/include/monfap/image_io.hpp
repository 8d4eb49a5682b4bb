#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace monfap {

// 8-bit PNG I/O. Images are planar RGB doubles in [0,1]; masks are 0/1 and
// stored as single-channel {0,255}. All functions throw std::runtime_error
// with the offending path on failure.

struct RawImage {
  int h = 0, w = 0;
  std::vector<double> rgb;  // 3*h*w planar
};

RawImage read_png_rgb(const std::string& path);
void write_png_rgb(const std::string& path, const std::vector<double>& rgb, int h,
                   int w);

std::vector<std::uint8_t> read_png_mask(const std::string& path, int& h, int& w);
void write_png_mask(const std::string& path, const std::vector<std::uint8_t>& mask,
                    int h, int w);

}  // namespace monfap
