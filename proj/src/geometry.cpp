#include "croptrack/geometry.hpp"

#include <algorithm>

namespace croptrack {

double area(const BoundingBox& b) {
  return (b.x_max - b.x_min) * (b.y_max - b.y_min);
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double x_overlap =
      std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double y_overlap =
      std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (x_overlap <= 0.0 || y_overlap <= 0.0) {
    return 0.0;
  }
  return x_overlap * y_overlap;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) {
    return 0.0;
  }
  // Union is strictly positive because boxes have positive area.
  return inter / (area(a) + area(b) - inter);
}

double boundary_measure(const BoundingBox& track_box, const BoundingBox& det_box) {
  return intersection_area(track_box, det_box) / area(det_box);
}

Zone zone_of(const BoundingBox& b, const ImageGeometry& g) {
  const double center = std::clamp(b.center_x(), 0.0, g.width);
  if (g.direction == Direction::RightToLeft) {
    if (center >= g.width * (1.0 - g.z_start)) return Zone::Start;
    if (center <= g.width * g.z_stop) return Zone::Stop;
  } else {
    if (center <= g.width * g.z_start) return Zone::Start;
    if (center >= g.width * (1.0 - g.z_stop)) return Zone::Stop;
  }
  return Zone::Middle;
}

const char* to_string(Zone z) {
  switch (z) {
    case Zone::Start: return "start";
    case Zone::Stop: return "stop";
    case Zone::Middle: return "middle";
  }
  return "?";
}

const char* to_string(Direction d) {
  return d == Direction::RightToLeft ? "rtl" : "ltr";
}

Direction direction_from_string(const std::string& s) {
  if (s == "rtl" || s == "right_to_left" || s == "right-to-left") {
    return Direction::RightToLeft;
  }
  if (s == "ltr" || s == "left_to_right" || s == "left-to-right") {
    return Direction::LeftToRight;
  }
  throw std::invalid_argument("unknown direction '" + s + "' (expected 'rtl' or 'ltr')");
}

}  // namespace croptrack
