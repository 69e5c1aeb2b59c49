#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "vceval/boxgeom.hpp"

using namespace vceval;

TEST_SUITE("boxgeom") {

TEST_CASE("iou examples") {
  const BoundingBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 5, 5}) == 0.0);
  CHECK(iou(a, {5, 0, 10, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // touching edges carry no overlap
  CHECK(iou(a, {10, 0, 10, 10}) == 0.0);
}

TEST_CASE("iou properties over random boxes") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-50.0, 150.0), size(0.01, 80.0);
  for (int i = 0; i < 5000; ++i) {
    const BoundingBox a{pos(rng), pos(rng), size(rng), size(rng)};
    const BoundingBox b{pos(rng), pos(rng), size(rng), size(rng)};
    const double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(iou(a, a) == 1.0);
    CHECK(ab == doctest::Approx(oracle::box_iou(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("make_box rejects degenerate boxes") {
  CHECK_THROWS_AS(make_box(0, 0, 0, 5), std::invalid_argument);
  CHECK_THROWS_AS(make_box(0, 0, 5, -1), std::invalid_argument);
  CHECK_THROWS_AS(make_box(NAN, 0, 5, 5), std::invalid_argument);
  CHECK(make_box(1, 2, 3, 4) == BoundingBox{1, 2, 3, 4});
}

TEST_CASE("nms examples") {
  CHECK(nms({}, 0.45).empty());

  const std::vector<Detection> twins = {{{0, 0, 10, 10}, 0, 0.8}, {{0, 0, 10, 10}, 0, 0.9}};
  const auto kept = nms(twins, 0.45);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);

  // different classes never suppress each other
  const std::vector<Detection> cross = {{{0, 0, 10, 10}, 0, 0.9}, {{0, 0, 10, 10}, 1, 0.8}};
  CHECK(nms(cross, 0.0).size() == 2);
}

TEST_CASE("nms at threshold 1 removes only lower-scored exact duplicates") {
  const std::vector<Detection> dets = {
      {{0, 0, 10, 10}, 0, 0.9}, {{0, 0, 10, 10}, 0, 0.5}, {{1, 0, 10, 10}, 0, 0.7}, {{0, 0, 10, 10}, 1, 0.4}};
  const auto idx = nms_indices(dets, 1.0);
  CHECK(idx == std::vector<std::size_t>{0, 2, 3});
}

TEST_CASE("nms equal scores keep the lower index") {
  const std::vector<Detection> dets = {{{0, 0, 10, 10}, 0, 0.5}, {{1, 1, 10, 10}, 0, 0.5}};
  CHECK(nms_indices(dets, 0.3) == std::vector<std::size_t>{0});
}

TEST_CASE("nms matches the brute-force oracle and its invariants") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(0, 12), extent(1, 8), cls(0, 1), n_dist(0, 8), score_q(0, 5);
  const double thresholds[] = {0.0, 0.2, 0.3, 0.45, 0.5, 0.7, 1.0};
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<Detection> dets(n_dist(rng));
    for (auto& d : dets) {
      d = {{double(coord(rng)), double(coord(rng)), double(extent(rng)), double(extent(rng))}, cls(rng),
           score_q(rng) / 5.0};
    }
    const double t = thresholds[trial % 7];
    const auto got = nms_indices(dets, t);
    CHECK(got == oracle::nms(dets, t));

    const auto out = nms(dets, t);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].score >= out[i].score);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(std::find(dets.begin(), dets.end(), out[i]) != dets.end());
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (out[i].class_id == out[j].class_id) CHECK_FALSE(iou(out[i].box, out[j].box) > t);
      }
    }
  }
}

TEST_CASE("clip_to examples") {
  CHECK(clip_to({1, 1, 5, 5}, 100, 100) == BoundingBox{1, 1, 5, 5});
  CHECK(clip_to({-5, -5, 10, 10}, 100, 100) == BoundingBox{0, 0, 5, 5});
  CHECK_FALSE(clip_to({200, 200, 5, 5}, 100, 100).has_value());
  CHECK_FALSE(clip_to({100, 0, 5, 5}, 100, 100).has_value());
  CHECK(clip_to({95, 95, 10, 10}, 100, 100) == BoundingBox{95, 95, 5, 5});
}

}
