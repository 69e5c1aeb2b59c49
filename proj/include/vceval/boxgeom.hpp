#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace vceval {

/// Axis-aligned box in continuous pixel coordinates, stored as top-left
/// corner plus size. Center-format boxes are converted at module boundaries.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double width = 0.0;
  double height = 0.0;

  static BoundingBox from_center(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, w, h};
  }

  double x_max() const { return x_min + width; }
  double y_max() const { return y_min + height; }
  double center_x() const { return x_min + width / 2.0; }
  double center_y() const { return y_min + height / 2.0; }
  double area() const { return width * height; }

  /// Finite coordinates with strictly positive extent.
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Checked constructor; throws std::invalid_argument on a degenerate box.
BoundingBox make_box(double x_min, double y_min, double width, double height);

struct Detection {
  BoundingBox box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthBox {
  BoundingBox box;
  int class_id = 0;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

/// Intersection over union. Touching boxes have zero overlap; iou(a, a) is
/// exactly 1.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Greedy per-class non-maximum suppression.
///
/// Within each class the highest-scoring remaining detection is kept and
/// every remaining same-class detection with IoU above `iou_threshold` is
/// discarded. Exact duplicates (IoU == 1) are always suppressed, so a
/// threshold of 1.0 removes only lower-scored duplicates. Equal scores are
/// ordered by original index. The result is sorted by descending score.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

/// Indices into `dets` of the survivors of nms(), in output order.
std::vector<std::size_t> nms_indices(std::span<const Detection> dets, double iou_threshold);

/// Intersection of `box` with [0, extent_w] x [0, extent_h]; empty when the
/// overlap is degenerate. A box already inside the extent is returned as-is.
std::optional<BoundingBox> clip_to(const BoundingBox& box, double extent_w, double extent_h);

}  // namespace vceval
