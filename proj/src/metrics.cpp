#include "vceval/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <fmt/core.h>

namespace vceval {

MatchResult match_detections(std::span<const EvalImage> images, double iou_threshold) {
  MatchResult result;
  for (const auto& img : images) {
    for (const auto& gt : img.ground_truths) {
      ++result.ground_truth_totals[gt.class_id];
      result.counts[gt.class_id];
    }
    for (const auto& d : img.detections) result.counts[d.class_id];
  }

  for (const auto& img : images) {
    const std::size_t base = result.flags.size();
    for (std::size_t i = 0; i < img.detections.size(); ++i) {
      const auto& d = img.detections[i];
      result.flags.push_back({img.image_id, i, d.class_id, d.score, false});
    }

    std::vector<std::size_t> order(img.detections.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
      return img.detections[l].score > img.detections[r].score;
    });

    std::vector<bool> claimed(img.ground_truths.size(), false);
    for (std::size_t idx : order) {
      const auto& d = img.detections[idx];
      double best_iou = 0.0;
      std::size_t best_gt = img.ground_truths.size();
      for (std::size_t g = 0; g < img.ground_truths.size(); ++g) {
        if (claimed[g] || img.ground_truths[g].class_id != d.class_id) continue;
        const double v = iou(d.box, img.ground_truths[g].box);
        if (v > best_iou) {
          best_iou = v;
          best_gt = g;
        }
      }
      // A zero-overlap ground truth never matches, even at threshold 0.
      if (best_gt < img.ground_truths.size() && best_iou >= iou_threshold) {
        claimed[best_gt] = true;
        result.flags[base + idx].true_positive = true;
        ++result.counts[d.class_id].tp;
      } else {
        ++result.counts[d.class_id].fp;
      }
    }
  }

  for (auto& [cls, c] : result.counts) {
    const auto it = result.ground_truth_totals.find(cls);
    const std::size_t total = it == result.ground_truth_totals.end() ? 0 : it->second;
    c.fn = total - c.tp;
  }
  return result;
}

double precision(const MatchCounts& c) {
  if (c.tp + c.fp == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const MatchCounts& c) {
  // Nothing to find: vacuously complete.
  if (c.tp + c.fn == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double f1(double p, double r) {
  if (p + r <= 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

PRCurve pr_curve(std::span<const ScoredFlag> flags, std::size_t total_gt, int class_id) {
  if (total_gt == 0) {
    throw MetricsError(MetricsErrc::NoGroundTruth,
                       fmt::format("class {} has no ground truth; its PR curve is undefined", class_id));
  }
  std::vector<const ScoredFlag*> ranked;
  ranked.reserve(flags.size());
  for (const auto& f : flags) ranked.push_back(&f);
  std::sort(ranked.begin(), ranked.end(), [](const ScoredFlag* a, const ScoredFlag* b) {
    if (a->score != b->score) return a->score > b->score;
    if (a->image_id != b->image_id) return a->image_id < b->image_id;
    return a->detection_index < b->detection_index;
  });

  PRCurve curve;
  curve.class_id = class_id;
  curve.total_ground_truth = total_gt;
  curve.points.reserve(ranked.size() + 1);
  curve.points.push_back({0.0, 1.0, 1.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const ScoredFlag* f : ranked) {
    if (f->true_positive) {
      ++tp;
    } else {
      ++fp;
    }
    curve.points.push_back({static_cast<double>(tp) / static_cast<double>(total_gt),
                            static_cast<double>(tp) / static_cast<double>(tp + fp), f->score});
  }
  return curve;
}

double average_precision(const PRCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 2) return 0.0;

  // Precision envelope: running maximum from the right.
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double step = pts[i].recall - pts[i - 1].recall;
    if (step > 0.0) ap += step * envelope[i];
  }
  return ap;
}

double mean_average_precision(const std::map<int, double>& per_class_ap) {
  if (per_class_ap.empty()) throw MetricsError(MetricsErrc::EmptyClassSet, "mAP over an empty class set");
  double sum = 0.0;
  for (const auto& [cls, ap] : per_class_ap) sum += ap;
  return sum / static_cast<double>(per_class_ap.size());
}

F1Max f1_max(const PRCurve& curve) {
  F1Max best;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    const double v = f1(p.precision, p.recall);
    if (v > best.f1) {
      best.f1 = v;
      best.at_threshold = p.score_threshold;
    }
  }
  return best;
}

std::map<int, double> MetricReport::per_class_ap() const {
  std::map<int, double> out;
  for (const auto& [cls, m] : per_class) out[cls] = m.ap;
  return out;
}

MetricReport evaluate(std::span<const EvalImage> images, double iou_threshold) {
  const MatchResult match = match_detections(images, iou_threshold);

  MetricReport report;
  report.iou_threshold = iou_threshold;
  std::size_t pooled_gt = 0;
  for (const auto& [cls, counts] : match.counts) {
    if (counts.tp + counts.fp == 0) report.empty_detection_precision = true;
    const auto it = match.ground_truth_totals.find(cls);
    if (it == match.ground_truth_totals.end()) continue;
    pooled_gt += it->second;

    std::vector<ScoredFlag> cls_flags;
    for (const auto& f : match.flags) {
      if (f.class_id == cls) cls_flags.push_back(f);
    }
    ClassMetrics cm;
    cm.class_id = cls;
    cm.counts = counts;
    cm.curve = pr_curve(cls_flags, it->second, cls);
    cm.ap = average_precision(cm.curve);
    cm.f1max = f1_max(cm.curve);
    report.per_class.emplace(cls, std::move(cm));
  }
  report.map = mean_average_precision(report.per_class_ap());
  report.f1_max = f1_max(pr_curve(match.flags, pooled_gt, -1));
  return report;
}

}  // namespace vceval
