#include "iconann/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iconann/error.hpp"

namespace iconann {

Image::Image(int height, int width, std::uint8_t fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width * 3, fill) {
  if (height < 0 || width < 0) throw std::invalid_argument("negative image size");
}

Image read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("cannot open " + path.string());
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw ParseError(path.string(), std::string("png: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  if (png.width == 0 || png.height == 0) {
    png_image_free(&png);
    throw ParseError(path.string(), "empty image");
  }
  Image img(static_cast<int>(png.height), static_cast<int>(png.width));
  const png_color black{0, 0, 0};
  if (!png_image_finish_read(&png, &black, img.bytes().data(), 0, nullptr)) {
    throw ParseError(path.string(), std::string("png: ") + png.message);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.bytes().data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + png.message);
  }
}

namespace {

// Samples the source at continuous pixel coordinates (pixel centers at +0.5).
void sample_bilinear(const Image& img, double sy, double sx, std::uint8_t out[3]) {
  const double fy = std::clamp(sy - 0.5, 0.0, img.height() - 1.0);
  const double fx = std::clamp(sx - 0.5, 0.0, img.width() - 1.0);
  const int y0 = static_cast<int>(fy);
  const int x0 = static_cast<int>(fx);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const double wy = fy - y0;
  const double wx = fx - x0;
  for (int c = 0; c < 3; ++c) {
    const double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
                     wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
    out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
}

}  // namespace

Image resize_bilinear(const Image& img, int out_height, int out_width) {
  if (img.height() == out_height && img.width() == out_width) return img;
  return crop_resize(img, {0.0, 0.0, 1.0, 1.0}, out_height, out_width);
}

Image crop_resize(const Image& img, const BoundingBox& box, int out_height, int out_width) {
  if (img.empty()) throw std::invalid_argument("crop_resize: empty image");
  Image out(out_height, out_width);
  const double x0 = box.x_min * img.width();
  const double y0 = box.y_min * img.height();
  const double sx = box.width() * img.width() / out_width;
  const double sy = box.height() * img.height() / out_height;
  std::uint8_t px[3];
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      sample_bilinear(img, y0 + (y + 0.5) * sy, x0 + (x + 0.5) * sx, px);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = px[c];
    }
  }
  return out;
}

void draw_box(Image& img, const BoundingBox& box, std::uint8_t r, std::uint8_t g, std::uint8_t b,
              int thickness) {
  const int x0 = std::clamp(static_cast<int>(box.x_min * img.width()), 0, img.width() - 1);
  const int x1 = std::clamp(static_cast<int>(box.x_max * img.width()) - 1, 0, img.width() - 1);
  const int y0 = std::clamp(static_cast<int>(box.y_min * img.height()), 0, img.height() - 1);
  const int y1 = std::clamp(static_cast<int>(box.y_max * img.height()) - 1, 0, img.height() - 1);
  auto put = [&](int y, int x) {
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
  };
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0; x <= x1; ++x) {
      put(std::min(y0 + t, y1), x);
      put(std::max(y1 - t, y0), x);
    }
    for (int y = y0; y <= y1; ++y) {
      put(y, std::min(x0 + t, x1));
      put(y, std::max(x1 - t, x0));
    }
  }
}

}  // namespace iconann
