#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vceval/boxgeom.hpp"

namespace vceval {

enum class MetricsErrc { NoGroundTruth, EmptyClassSet };

class MetricsError : public std::runtime_error {
 public:
  MetricsError(MetricsErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  MetricsErrc code() const { return code_; }

 private:
  MetricsErrc code_;
};

inline constexpr double kDefaultEvalIou = 0.30;

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

/// Detections and ground truths of one image.
struct EvalImage {
  std::string image_id;
  std::vector<Detection> detections;
  std::vector<GroundTruthBox> ground_truths;
};

/// Outcome of one detection after matching.
struct ScoredFlag {
  std::string image_id;
  std::size_t detection_index = 0;
  int class_id = 0;
  double score = 0.0;
  bool true_positive = false;
};

struct MatchResult {
  /// One flag per detection, in input order (image, then detection).
  std::vector<ScoredFlag> flags;
  std::map<int, MatchCounts> counts;
  std::map<int, std::size_t> ground_truth_totals;
};

/// Greedy one-to-one matching per image and class. Detections are visited in
/// descending score (ties: lower index first); each claims the unmatched
/// same-class ground truth with the highest IoU when that IoU reaches
/// `iou_threshold`.
MatchResult match_detections(std::span<const EvalImage> images, double iou_threshold);

double precision(const MatchCounts& c);
double recall(const MatchCounts& c);
double f1(double p, double r);

struct PRPoint {
  double recall = 0.0;
  double precision = 1.0;
  double score_threshold = 1.0;

  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

/// Starts at the (R=0, P=1) anchor, then one point per ranked detection.
struct PRCurve {
  int class_id = 0;
  std::size_t total_ground_truth = 0;
  std::vector<PRPoint> points;
};

/// Builds the curve from one class's flags. Flags are ranked by descending
/// score, ties broken by image_id then detection index.
PRCurve pr_curve(std::span<const ScoredFlag> flags, std::size_t total_gt, int class_id = 0);

/// All-point interpolated area under the curve.
double average_precision(const PRCurve& curve);

double mean_average_precision(const std::map<int, double>& per_class_ap);

struct F1Max {
  double f1 = 0.0;
  double at_threshold = 1.0;
};

/// Best F1 over the curve's ranks; ties go to the higher threshold.
F1Max f1_max(const PRCurve& curve);

struct ClassMetrics {
  int class_id = 0;
  double ap = 0.0;
  F1Max f1max;
  MatchCounts counts;
  PRCurve curve;
};

struct MetricReport {
  std::map<int, ClassMetrics> per_class;
  double map = 0.0;
  /// F1-max of the curve built from every class's flags pooled together.
  F1Max f1_max;
  double iou_threshold = kDefaultEvalIou;
  /// True when some class had no retained detections (precision reported as 1).
  bool empty_detection_precision = false;

  std::map<int, double> per_class_ap() const;
};

/// Full evaluation over an image set. Classes without ground truth carry no
/// AP and are excluded from mAP.
MetricReport evaluate(std::span<const EvalImage> images, double iou_threshold);

}  // namespace vceval
