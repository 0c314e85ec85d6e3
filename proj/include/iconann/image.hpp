#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "iconann/geometry.hpp"

namespace iconann {

/// 8-bit RGB image, row-major, interleaved channels.
class Image {
 public:
  Image() = default;
  Image(int height, int width, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return height_ == 0 || width_ == 0; }

  std::uint8_t& at(int y, int x, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }

  const std::vector<std::uint8_t>& bytes() const { return data_; }
  std::vector<std::uint8_t>& bytes() { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Reads any PNG and converts it to 8-bit RGB (alpha dropped, gray expanded).
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

/// Bilinear resample with pixel-center alignment.
Image resize_bilinear(const Image& img, int out_height, int out_width);

/// Bilinear resample of the region `box` (normalized) to out_height x out_width.
Image crop_resize(const Image& img, const BoundingBox& box, int out_height, int out_width);

/// Draws a rectangle outline, used for debug overlays.
void draw_box(Image& img, const BoundingBox& box, std::uint8_t r, std::uint8_t g, std::uint8_t b,
              int thickness = 1);

}  // namespace iconann
