#include "vceval/boxgeom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vceval {

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(width) &&
         std::isfinite(height) && width > 0.0 && height > 0.0;
}

BoundingBox make_box(double x_min, double y_min, double width, double height) {
  BoundingBox box{x_min, y_min, width, height};
  if (!box.valid()) {
    throw std::invalid_argument("invalid bounding box: width and height must be positive and finite");
  }
  return box;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  // Areas are derived from the same corner values as the intersection so
  // that identical boxes give inter == union bit-for-bit.
  const double ax1 = a.x_max();
  const double ay1 = a.y_max();
  const double bx1 = b.x_max();
  const double by1 = b.y_max();

  const double iw = std::min(ax1, bx1) - std::max(a.x_min, b.x_min);
  const double ih = std::min(ay1, by1) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;

  const double inter = iw * ih;
  const double area_a = (ax1 - a.x_min) * (ay1 - a.y_min);
  const double area_b = (bx1 - b.x_min) * (by1 - b.y_min);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> nms_indices(std::span<const Detection> dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return dets[l].score > dets[r].score;
  });

  std::vector<bool> removed(dets.size(), false);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t cur = order[i];
    if (removed[cur]) continue;
    kept.push_back(cur);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const std::size_t other = order[j];
      if (removed[other] || dets[other].class_id != dets[cur].class_id) continue;
      const double overlap = iou(dets[cur].box, dets[other].box);
      if (overlap > iou_threshold || overlap >= 1.0) removed[other] = true;
    }
  }
  return kept;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  std::vector<Detection> out;
  for (std::size_t idx : nms_indices(dets, iou_threshold)) out.push_back(dets[idx]);
  return out;
}

std::optional<BoundingBox> clip_to(const BoundingBox& box, double extent_w, double extent_h) {
  if (box.x_min >= 0.0 && box.y_min >= 0.0 && box.x_max() <= extent_w &&
      box.y_max() <= extent_h) {
    return box;
  }
  const double x0 = std::max(box.x_min, 0.0);
  const double y0 = std::max(box.y_min, 0.0);
  const double x1 = std::min(box.x_max(), extent_w);
  const double y1 = std::min(box.y_max(), extent_h);
  if (x1 - x0 <= 0.0 || y1 - y0 <= 0.0) return std::nullopt;
  return BoundingBox{x0, y0, x1 - x0, y1 - y0};
}

}  // namespace vceval
