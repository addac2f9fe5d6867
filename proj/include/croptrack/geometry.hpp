#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace croptrack {

/// Axis-aligned box in pixel coordinates. Coordinates are continuous
/// (sub-pixel positions are legal); zero- or negative-area boxes are
/// rejected at construction so every downstream ratio is well defined.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  BoundingBox() = default;

  BoundingBox(double x_min_, double y_min_, double x_max_, double y_max_)
      : x_min(x_min_), y_min(y_min_), x_max(x_max_), y_max(y_max_) {
    if (!std::isfinite(x_min) || !std::isfinite(y_min) ||
        !std::isfinite(x_max) || !std::isfinite(y_max)) {
      throw std::invalid_argument("BoundingBox: coordinates must be finite");
    }
    if (!(x_min < x_max) || !(y_min < y_max)) {
      throw std::invalid_argument(
          "BoundingBox: requires x_min < x_max and y_min < y_max, got [" +
          std::to_string(x_min_) + ", " + std::to_string(y_min_) + ", " +
          std::to_string(x_max_) + ", " + std::to_string(y_max_) + "]");
    }
  }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  BoundingBox translated(double dx, double dy) const {
    return BoundingBox(x_min + dx, y_min + dy, x_max + dx, y_max + dy);
  }

  bool operator==(const BoundingBox&) const = default;
};

/// Travel direction of the camera pass. Objects in the image drift
/// opposite to camera motion; the start/stop zones mirror with it.
enum class Direction { RightToLeft, LeftToRight };

/// Zone classification of a box within the image.
enum class Zone { Start, Stop, Middle };

/// Image dimensions plus the start/stop zone layout used by the tracker.
/// Zones are fractions of the image width measured from the edge where
/// objects enter (start) and exit (stop); they must not overlap.
struct ImageGeometry {
  double width = 0.0;
  double height = 0.0;
  Direction direction = Direction::RightToLeft;
  double z_start = 0.2;
  double z_stop = 0.15;

  ImageGeometry() = default;

  ImageGeometry(double width_, double height_,
                Direction direction_ = Direction::RightToLeft,
                double z_start_ = 0.2, double z_stop_ = 0.15)
      : width(width_), height(height_), direction(direction_),
        z_start(z_start_), z_stop(z_stop_) {
    validate();
  }

  void validate() const {
    if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) ||
        !std::isfinite(height)) {
      throw std::invalid_argument("ImageGeometry: width and height must be positive");
    }
    if (!(z_start >= 0.0) || z_start >= 1.0 || !(z_stop >= 0.0) || z_stop >= 1.0) {
      throw std::invalid_argument("ImageGeometry: zone fractions must lie in [0,1)");
    }
    if (z_start + z_stop >= 1.0) {
      throw std::invalid_argument("ImageGeometry: start and stop zones overlap (z_start + z_stop >= 1)");
    }
  }

  bool operator==(const ImageGeometry&) const = default;
};

/// Box area in square pixels. Positive by construction.
double area(const BoundingBox& b);

/// Overlap area of two boxes; 0 when disjoint. Symmetric.
double intersection_area(const BoundingBox& a, const BoundingBox& b);

/// Intersection over union, in [0,1]. Symmetric; 1 exactly iff a == b.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Fraction of the detection contained within the track box:
/// intersection / area(det_box). Asymmetric; catches small detections
/// sitting inside a large track, which IoU alone misses.
double boundary_measure(const BoundingBox& track_box, const BoundingBox& det_box);

/// Classifies a box by its horizontal center. The center is clamped into
/// [0, width] first, so boxes hanging off the image edge classify by the
/// nearest edge. Start and stop bands mirror with the travel direction.
Zone zone_of(const BoundingBox& b, const ImageGeometry& g);

const char* to_string(Zone z);
const char* to_string(Direction d);

/// Parses "rtl"/"ltr" (also accepts the long spellings). Throws on anything else.
Direction direction_from_string(const std::string& s);

}  // namespace croptrack
