#pragma once

#include <array>
#include <string>

namespace iconann {

/// Axis-aligned rectangle in coordinates normalized to the screen, [0,1] on both axes.
/// x grows to the right, y grows downward.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  /// True when 0 <= min < max <= 1 on both axes.
  bool valid() const;

  /// Inclusive on all four edges.
  bool contains(double x, double y) const;

  std::array<double, 4> as_array() const { return {x_min, y_min, x_max, y_max}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
  friend auto operator<=>(const BoundingBox&, const BoundingBox&) = default;
};

/// Throws std::invalid_argument unless the box is valid.
BoundingBox make_box(double x_min, double y_min, double x_max, double y_max);

BoundingBox clamp_unit(const BoundingBox& b);

double intersection_area(const BoundingBox& a, const BoundingBox& b);
double iou(const BoundingBox& a, const BoundingBox& b);

std::string to_string(const BoundingBox& b);

}  // namespace iconann
