#include "iconann/geometry.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace iconann {

bool BoundingBox::valid() const {
  return x_min >= 0.0 && y_min >= 0.0 && x_min < x_max && y_min < y_max && x_max <= 1.0 &&
         y_max <= 1.0;
}

bool BoundingBox::contains(double x, double y) const {
  return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
}

BoundingBox make_box(double x_min, double y_min, double x_max, double y_max) {
  BoundingBox b{x_min, y_min, x_max, y_max};
  if (!b.valid()) throw std::invalid_argument("invalid bounding box " + to_string(b));
  return b;
}

BoundingBox clamp_unit(const BoundingBox& b) {
  auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {c(b.x_min), c(b.y_min), c(b.x_max), c(b.y_max)};
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::string to_string(const BoundingBox& b) {
  std::ostringstream os;
  os << "(" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max << ")";
  return os.str();
}

}  // namespace iconann
