#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "vceval/metrics.hpp"

using namespace vceval;

namespace {

std::vector<ScoredFlag> flags_of(std::initializer_list<std::pair<double, bool>> items) {
  std::vector<ScoredFlag> out;
  std::size_t i = 0;
  for (const auto& [s, tp] : items) out.push_back({"img", i++, 0, s, tp});
  return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("match_detections examples") {
  const GroundTruthBox gt{{0, 0, 10, 10}, 0};
  std::vector<EvalImage> imgs = {{"a", {{gt.box, 0, 0.9}}, {gt}}};
  auto m = match_detections(imgs, 0.3);
  CHECK(m.counts.at(0) == MatchCounts{1, 0, 0});

  imgs = {{"a", {{{1, 0, 10, 10}, 0, 0.8}, {{0, 0, 10, 10}, 0, 0.9}}, {gt}}};
  m = match_detections(imgs, 0.3);
  CHECK(m.counts.at(0) == MatchCounts{1, 1, 0});
  CHECK(m.flags[1].true_positive);
  CHECK_FALSE(m.flags[0].true_positive);

  imgs = {{"a", {}, {gt, gt, gt}}};
  CHECK(match_detections(imgs, 0.3).counts.at(0) == MatchCounts{0, 0, 3});

  // a zero-overlap ground truth never matches, even at threshold 0
  imgs = {{"a", {{{50, 50, 5, 5}, 0, 0.9}}, {gt}}};
  CHECK(match_detections(imgs, 0.0).counts.at(0) == MatchCounts{0, 1, 1});

  // classes never match across
  imgs = {{"a", {{gt.box, 1, 0.9}}, {gt}}};
  m = match_detections(imgs, 0.3);
  CHECK(m.counts.at(0) == MatchCounts{0, 0, 1});
  CHECK(m.counts.at(1) == MatchCounts{0, 1, 0});
}

TEST_CASE("precision recall f1") {
  CHECK(precision({5, 0, 0}) == 1.0);
  CHECK(recall({5, 0, 0}) == 1.0);
  CHECK(f1(1.0, 1.0) == 1.0);
  CHECK(f1(0.8, 0.6) == doctest::Approx(0.685714).epsilon(1e-6));
  CHECK(f1(0.37, 0.37) == 0.37);
  CHECK(f1(0.0, 0.0) == 0.0);
  CHECK(precision({0, 0, 3}) == 1.0);
  CHECK(recall({0, 4, 0}) == 1.0);
  CHECK(recall({1, 0, 3}) == 0.25);
}

TEST_CASE("pr_curve examples") {
  auto c = pr_curve(flags_of({{0.9, true}}), 1);
  CHECK(c.points == std::vector<PRPoint>{{0, 1, 1.0}, {1, 1, 0.9}});
  c = pr_curve(flags_of({{0.9, true}, {0.8, false}}), 1);
  CHECK(c.points == std::vector<PRPoint>{{0, 1, 1.0}, {1, 1, 0.9}, {1, 0.5, 0.8}});
  CHECK(average_precision(c) == 1.0);
  c = pr_curve(flags_of({{0.9, false}, {0.8, true}}), 1);
  CHECK(c.points == std::vector<PRPoint>{{0, 1, 1.0}, {0, 0, 0.9}, {1, 0.5, 0.8}});
  CHECK(average_precision(c) == 0.5);
  CHECK_THROWS_AS(pr_curve(flags_of({{0.9, false}}), 0), MetricsError);
  CHECK(average_precision(pr_curve(flags_of({{0.9, true}}), 1)) == 1.0);
}

TEST_CASE("mean_average_precision") {
  CHECK(mean_average_precision({{0, 0.8}, {1, 0.6}}) == doctest::Approx(0.7));
  CHECK(mean_average_precision({{0, 0.42}}) == 0.42);
  CHECK(mean_average_precision({{0, 0.812}, {1, 0.79}}) == doctest::Approx(0.801));
  CHECK(mean_average_precision({{0, 0.3}, {1, 0.3}, {2, 0.3}}) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(mean_average_precision({}), MetricsError);
}

TEST_CASE("f1_max") {
  PRCurve perfect = pr_curve(flags_of({{0.9, true}, {0.7, true}}), 2);
  auto f = f1_max(perfect);
  CHECK(f.f1 == 1.0);
  CHECK(f.at_threshold == 0.7);

  PRCurve hand;
  hand.points = {{0, 1, 1}, {0.5, 1.0, 0.9}, {1.0, 0.6, 0.5}};
  f = f1_max(hand);
  CHECK(f.f1 == doctest::Approx(0.75));
  CHECK(f.at_threshold == 0.5);

  CHECK(f1_max(pr_curve(flags_of({{0.9, false}, {0.5, false}}), 3)).f1 == 0.0);
  const auto empty = f1_max(PRCurve{});
  CHECK(empty.f1 == 0.0);
  CHECK(empty.at_threshold == 1.0);

  // equal F1 at two ranks: the higher threshold wins
  hand.points = {{0, 1, 1}, {0.5, 0.5, 0.8}, {0.5, 0.5, 0.4}};
  CHECK(f1_max(hand).at_threshold == 0.8);
}

TEST_CASE("AP equals the step-integration oracle") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t gt = 1 + rng() % 10;
    const std::size_t n = rng() % 21;
    std::vector<ScoredFlag> flags;
    std::vector<oracle::Flag> oflags;
    std::size_t tps = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool tp = tps < gt && rng() % 2 == 0;
      tps += tp;
      const double s = double(rng() % 8) / 8.0;
      const std::string img = "i" + std::to_string(rng() % 3);
      flags.push_back({img, i, 0, s, tp});
      oflags.push_back({img, i, s, tp});
    }
    const double ap = average_precision(pr_curve(flags, gt));
    CHECK(std::abs(ap - oracle::average_precision(oflags, gt)) <= 1e-9);

    auto shuffled = flags;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(average_precision(pr_curve(shuffled, gt)) == ap);

    const auto c = pr_curve(flags, gt);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].recall >= c.points[i - 1].recall);
      CHECK(c.points[i].score_threshold <= c.points[i - 1].score_threshold);
    }

    if (tps < gt) {
      auto more = flags;
      more.push_back({"new", 0, 0, 2.0, true});
      CHECK(average_precision(pr_curve(more, gt)) >= ap - 1e-12);
    }
  }
}

TEST_CASE("evaluate against the brute-force matcher and oracle AP") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> pos(0, 60), size(5, 25), score(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EvalImage> imgs(1 + rng() % 4);
    std::map<int, std::size_t> gt_total;
    std::map<int, std::vector<oracle::Flag>> per_class;
    for (std::size_t k = 0; k < imgs.size(); ++k) {
      auto& img = imgs[k];
      img.image_id = "img" + std::to_string(k);
      for (std::size_t g = rng() % 4; g-- > 0;) {
        img.ground_truths.push_back({{pos(rng), pos(rng), size(rng), size(rng)}, int(rng() % 2)});
        ++gt_total[img.ground_truths.back().class_id];
      }
      for (std::size_t d = rng() % 6; d-- > 0;) {
        img.detections.push_back({{pos(rng), pos(rng), size(rng), size(rng)}, int(rng() % 2), score(rng)});
      }
      const auto tp = oracle::match_image(img.detections, img.ground_truths, 0.3);
      for (std::size_t d = 0; d < tp.size(); ++d) {
        per_class[img.detections[d].class_id].push_back({img.image_id, d, img.detections[d].score, tp[d]});
      }
    }
    if (gt_total.empty()) continue;
    const auto report = evaluate(imgs, 0.3);
    double sum = 0.0;
    for (const auto& [cls, total] : gt_total) {
      const double expected = oracle::average_precision(per_class[cls], total);
      REQUIRE(report.per_class.contains(cls));
      CHECK(report.per_class.at(cls).ap == doctest::Approx(expected).epsilon(1e-12));
      sum += expected;
    }
    CHECK(report.map == doctest::Approx(sum / gt_total.size()).epsilon(1e-12));
    CHECK(report.map >= 0.0);
    CHECK(report.map <= 1.0);

    auto reversed = imgs;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(evaluate(reversed, 0.3).map == report.map);
  }
}

TEST_CASE("report F1-max pools every class's flags") {
  const GroundTruthBox a{{0, 0, 10, 10}, 0}, b{{20, 20, 10, 10}, 1};
  std::vector<EvalImage> imgs = {{"x", {{a.box, 0, 0.9}, {{50, 50, 5, 5}, 1, 0.8}}, {a, b}}};
  const auto r = evaluate(imgs, 0.3);
  // pooled: TP then FP over 2 GT -> best F1 at rank 1, P=1 R=0.5
  CHECK(r.f1_max.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1_max.at_threshold == 0.9);
  CHECK(r.per_class.at(1).ap == 0.0);
  CHECK(r.map == 0.5);
}

TEST_CASE("classes without ground truth stay out of mAP") {
  const GroundTruthBox a{{0, 0, 10, 10}, 0};
  std::vector<EvalImage> imgs = {{"x", {{a.box, 0, 0.9}, {a.box, 1, 0.8}}, {a}}};
  const auto r = evaluate(imgs, 0.3);
  CHECK(r.per_class.size() == 1);
  CHECK(r.map == 1.0);
  imgs = {{"x", {}, {a}}};
  const auto empty = evaluate(imgs, 0.3);
  CHECK(empty.map == 0.0);
  CHECK(empty.empty_detection_precision);
}

}
