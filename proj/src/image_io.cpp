#include "monfap/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace monfap {

namespace {

[[noreturn]] void fail(const std::string& path, const char* what) {
  throw std::runtime_error(std::string(what) + ": " + path);
}

struct FileCloser {
  std::FILE* f = nullptr;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

std::uint8_t to_byte(double v) {
  double s = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::lround(s));
}

// Decodes any 8/16-bit gray/palette/RGB(A) PNG into packed 8-bit RGB rows.
void read_rgb8(const std::string& path, int& h, int& w,
               std::vector<std::uint8_t>& rows) {
  FileCloser fc;
  fc.f = std::fopen(path.c_str(), "rb");
  if (!fc.f) fail(path, "cannot open PNG");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "PNG decode error");
  }

  png_init_io(png, fc.f);
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<size_t>(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "unexpected PNG row layout");
  }

  rows.assign(static_cast<size_t>(h) * w * 3, 0);
  std::vector<png_bytep> ptrs(h);
  for (int i = 0; i < h; ++i) ptrs[i] = rows.data() + static_cast<size_t>(i) * w * 3;
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

void write_png8(const std::string& path, const std::vector<std::uint8_t>& rows,
                int h, int w, int channels) {
  FileCloser fc;
  fc.f = std::fopen(path.c_str(), "wb");
  if (!fc.f) fail(path, "cannot create PNG");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "PNG encode error");
  }

  png_init_io(png, fc.f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h),
               8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> ptrs(h);
  for (int i = 0; i < h; ++i)
    ptrs[i] = const_cast<png_bytep>(rows.data() + static_cast<size_t>(i) * w * channels);
  png_write_image(png, ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RawImage read_png_rgb(const std::string& path) {
  RawImage out;
  std::vector<std::uint8_t> rows;
  read_rgb8(path, out.h, out.w, rows);
  size_t n = static_cast<size_t>(out.h) * out.w;
  out.rgb.assign(3 * n, 0.0);
  for (size_t p = 0; p < n; ++p)
    for (int c = 0; c < 3; ++c) out.rgb[c * n + p] = rows[p * 3 + c] / 255.0;
  return out;
}

void write_png_rgb(const std::string& path, const std::vector<double>& rgb, int h,
                   int w) {
  size_t n = static_cast<size_t>(h) * w;
  if (rgb.size() != 3 * n) fail(path, "RGB buffer size mismatch");
  std::vector<std::uint8_t> rows(3 * n);
  for (size_t p = 0; p < n; ++p)
    for (int c = 0; c < 3; ++c) rows[p * 3 + c] = to_byte(rgb[c * n + p]);
  write_png8(path, rows, h, w, 3);
}

std::vector<std::uint8_t> read_png_mask(const std::string& path, int& h, int& w) {
  std::vector<std::uint8_t> rows;
  read_rgb8(path, h, w, rows);
  size_t n = static_cast<size_t>(h) * w;
  std::vector<std::uint8_t> mask(n);
  for (size_t p = 0; p < n; ++p) mask[p] = rows[p * 3] >= 128 ? 1 : 0;
  return mask;
}

void write_png_mask(const std::string& path, const std::vector<std::uint8_t>& mask,
                    int h, int w) {
  size_t n = static_cast<size_t>(h) * w;
  if (mask.size() != n) fail(path, "mask buffer size mismatch");
  std::vector<std::uint8_t> rows(n);
  for (size_t p = 0; p < n; ++p) rows[p] = mask[p] ? 255 : 0;
  write_png8(path, rows, h, w, 1);
}

}  // namespace monfap
