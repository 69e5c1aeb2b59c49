#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "vceval/netops.hpp"

using namespace vceval;

namespace {

double naive_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RawHeadTensor random_tensor(std::size_t k, std::size_t side, std::mt19937_64& rng, double spread) {
  std::normal_distribution<double> n(0.0, spread);
  RawHeadTensor t(3 * (5 + k), side, side);
  for (auto& v : t.values()) v = static_cast<float>(n(rng));
  return t;
}

}  // namespace

TEST_SUITE("netops") {

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(0.2) == doctest::Approx(0.549834).epsilon(1e-6));
  for (double x = -40.0; x <= 40.0; x += 0.37) {
    CHECK(std::abs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-12);
    CHECK(sigmoid(x) == doctest::Approx(naive_sigmoid(x)).epsilon(1e-14));
    CHECK(sigmoid(x + 0.01) >= sigmoid(x));
  }
  CHECK(std::isfinite(sigmoid(-1000.0)));
}

TEST_CASE("relu") {
  CHECK(relu(-3.0) == 0.0);
  CHECK(relu(0.0) == 0.0);
  CHECK(relu(2.5) == 2.5);
}

TEST_CASE("softmax") {
  const std::vector<double> two = {0.0, 0.0};
  CHECK(softmax(two) == std::vector<double>{0.5, 0.5});
  for (double c : {-500.0, 0.0, 3.0, 800.0}) {
    const std::vector<double> v = {c, c, c};
    for (double p : softmax(v)) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  const std::vector<double> v = {1, 2, 3};
  const auto s = softmax(v);
  CHECK(s[0] == doctest::Approx(0.090031).epsilon(1e-5));
  CHECK(s[1] == doctest::Approx(0.244728).epsilon(1e-5));
  CHECK(s[2] == doctest::Approx(0.665241).epsilon(1e-5));
  CHECK_THROWS_AS(softmax(std::vector<double>{}), NetopsError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> x(1 + i % 9);
    for (auto& e : x) e = u(rng);
    const auto p = softmax(x);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
    std::vector<double> shifted = x;
    const double c = u(rng) * 10;
    for (auto& e : shifted) e += c;
    const auto q = softmax(shifted);
    for (std::size_t j = 0; j < x.size(); ++j) {
      CHECK(std::abs(p[j] - q[j]) <= 1e-9);
      for (std::size_t m = 0; m < x.size(); ++m) {
        if (x[j] < x[m]) CHECK(p[j] <= p[m]);
      }
    }
  }
}

TEST_CASE("decode_cell examples") {
  RawCellPrediction raw{0, 0, 0, 0, 0, {0.0, 0.0}};
  auto d = decode_cell(raw, {0, 0, 32}, {30, 60});
  CHECK(d.center_x == 16.0);
  CHECK(d.center_y == 16.0);
  CHECK(d.width == 30.0);
  CHECK(d.height == 60.0);
  CHECK(d.score == 0.25);

  raw = {0.2, -0.5, 0.1, -0.3, 0.0, {0.0, 0.0}};
  d = decode_cell(raw, {3, 4, 32}, {30, 60});
  CHECK(d.center_x == doctest::Approx(113.5947).epsilon(1e-6));
  CHECK(d.center_y == doctest::Approx(140.0813).epsilon(1e-6));
  CHECK(d.width == doctest::Approx(33.1551).epsilon(1e-6));
  // 60 * e^-0.3 = 44.44909; the commonly quoted 44.4449 is an arithmetic slip
  CHECK(d.height == doctest::Approx(60.0 * std::exp(-0.3)).epsilon(1e-14));
  CHECK(d.height == doctest::Approx(44.44909).epsilon(1e-6));
}

TEST_CASE("decode_cell picks the best class by sigmoid") {
  RawCellPrediction raw{0, 0, 0, 0, 2.0, {-1.0, 3.0, 0.5}};
  const auto d = decode_cell(raw, {0, 0, 8}, {10, 13});
  CHECK(d.class_id == 1);
  CHECK(d.score == doctest::Approx(naive_sigmoid(2.0) * naive_sigmoid(3.0)).epsilon(1e-14));
}

TEST_CASE("decode_cell center stays inside its cell") {
  for (double t : {-1e3, -50.0, -5.0, 0.0, 5.0, 30.0, 1e3}) {
    RawCellPrediction raw{t, t, t / 100, -t / 100, 0, {0}};
    const auto d = decode_cell(raw, {5, 7, 16}, {10, 10});
    CHECK(d.center_x >= 5 * 16.0);
    CHECK(d.center_x <= 6 * 16.0);
    CHECK(d.center_y >= 7 * 16.0);
    CHECK(d.center_y <= 8 * 16.0);
    CHECK(d.width > 0.0);
    CHECK(d.height > 0.0);
  }
  RawCellPrediction big{40, 0, 0, 0, 0, {0}};
  CHECK(decode_cell(big, {2, 0, 32}, {1, 1}).center_x == doctest::Approx(96.0));
}

TEST_CASE("grid_shape") {
  CHECK(grid_shape(416) == std::array<int, 3>{13, 26, 52});
  CHECK(grid_shape(320) == std::array<int, 3>{10, 20, 40});
  CHECK(grid_shape(512) == std::array<int, 3>{16, 32, 64});
  for (int s = 32; s <= 1024; s += 32) {
    const auto g = grid_shape(s);
    CHECK(g[1] == 2 * g[0]);
    CHECK(g[2] == 4 * g[0]);
  }
  CHECK_THROWS_AS(grid_shape(400), NetopsError);
  CHECK_THROWS_AS(grid_shape(0), NetopsError);
}

TEST_CASE("anchors") {
  const auto a = default_anchors();
  CHECK(a[0].p_w == 10);
  CHECK(a[0].p_h == 13);
  CHECK(a[8].p_w == 373);
  CHECK(a[8].p_h == 326);
  CHECK(anchors_for_scale(a, 0)[0].p_w == 116);
  CHECK(anchors_for_scale(a, 2)[2].p_w == 33);
}

TEST_CASE("decode_head examples") {
  const auto anchors = anchors_for_scale(default_anchors(), 0);
  RawHeadTensor zeros(3 * 7, 13, 13);
  CHECK(decode_head(zeros, 2, anchors, 32, 0.30).empty());
  CHECK(decode_head(zeros, 2, anchors, 32, 0.0).size() == 3u * 13 * 13);
  CHECK(decode_head(zeros, 2, anchors, 32, 0.25).size() == 3u * 13 * 13);

  RawHeadTensor hot(3 * 7, 13, 13, -10.0f);
  for (std::size_t a = 0; a < 3; ++a) {
    hot.at(a * 7 + 4, 6, 2) = 10.0f;
    hot.at(a * 7 + 5, 6, 2) = 10.0f;
  }
  const auto dets = decode_head(hot, 2, anchors, 32, 0.30);
  REQUIRE(dets.size() == 3);
  for (std::size_t a = 0; a < 3; ++a) {
    CHECK(dets[a].class_id == 0);
    CHECK(dets[a].box.center_x() == doctest::Approx((2 + naive_sigmoid(-10)) * 32));
    CHECK(dets[a].box.width == doctest::Approx(anchors[a].p_w * std::exp(-10.0)));
  }

  CHECK_THROWS_AS(decode_head(RawHeadTensor(20, 13, 13), 2, anchors, 32, 0.3), NetopsError);
}

TEST_CASE("decode_head agrees with a per-cell loop") {
  std::mt19937_64 rng(5);
  const auto anchors = anchors_for_scale(default_anchors(), 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + trial % 3;
    const auto t = random_tensor(k, 6, rng, 2.0);
    const double thr = 0.05 * (trial % 10);
    std::size_t expected = 0;
    for (std::size_t y = 0; y < 6; ++y) {
      for (std::size_t x = 0; x < 6; ++x) {
        for (std::size_t a = 0; a < 3; ++a) {
          const std::size_t base = a * (5 + k);
          double best = 0.0;
          for (std::size_t c = 0; c < k; ++c) best = std::max(best, naive_sigmoid(t.at(base + 5 + c, y, x)));
          if (naive_sigmoid(t.at(base + 4, y, x)) * best >= thr) ++expected;
        }
      }
    }
    CHECK(decode_head(t, k, anchors, 16, thr).size() == expected);
  }
}

TEST_CASE("assign_responsible_cells") {
  auto gt = [](double cx, double cy) { return GroundTruthBox{BoundingBox::from_center(cx, cy, 2, 2), 0}; };
  const std::vector<GroundTruthBox> boxes = {gt(16, 16), gt(415.9, 1.1), gt(32.0, 1.0)};
  const auto cells = assign_responsible_cells(boxes, 13, 416);
  CHECK(cells[0] == GridCell{0, 0, 32});
  CHECK(cells[1] == GridCell{12, 0, 32});
  CHECK(cells[2] == GridCell{1, 0, 32});
  const std::vector<GroundTruthBox> outside = {gt(420, 10)};
  CHECK_THROWS_AS(assign_responsible_cells(outside, 13, 416), NetopsError);
}

TEST_CASE("residual block") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  FeatureMap y(4, 5, 6);
  for (auto& v : y.values()) v = n(rng);

  ResidualBlockWeights w{ConvKernel::zeros(2, 4, 1, 1), ConvKernel::zeros(4, 2, 3, 3), BatchNormParams::identity(4),
                         BatchNormParams::identity(2)};
  CHECK(residual_block_forward(y, w) == y);

  BatchNormParams bn{{0, 0, 0, 0}, {1, 1, 1, 1}, {1, 1, 1, 1}, {0, 0, 0, 0}, 0.0};
  CHECK(batch_norm(y, bn) == y);

  FeatureMap one(1, 1, 1, 2.0);
  ResidualBlockWeights unit{ConvKernel::zeros(1, 1, 1, 1), ConvKernel::zeros(1, 1, 1, 1),
                            BatchNormParams::identity(1, 0.0), BatchNormParams::identity(1, 0.0)};
  unit.w_prime.at(0, 0, 0, 0) = 1.0;
  unit.w.at(0, 0, 0, 0) = 1.0;
  CHECK(residual_block_forward(one, unit).at(0, 0, 0) == 4.0);

  // the default epsilon shrinks the normalized value slightly
  unit.bn_in = BatchNormParams::identity(1);
  unit.bn_mid = BatchNormParams::identity(1);
  CHECK(residual_block_forward(one, unit).at(0, 0, 0) == doctest::Approx(2.0 + 2.0 / (1.0 + 1e-5)).epsilon(1e-12));

  ResidualBlockWeights bad{ConvKernel::zeros(2, 3, 1, 1), ConvKernel::zeros(4, 2, 1, 1), BatchNormParams::identity(4),
                           BatchNormParams::identity(2)};
  CHECK_THROWS_AS(residual_block_forward(y, bad), NetopsError);
}

TEST_CASE("conv2d_same against direct summation") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n;
  FeatureMap x(2, 4, 5);
  for (auto& v : x.values()) v = n(rng);
  auto k = ConvKernel::zeros(3, 2, 3, 3);
  for (auto& v : k.weights) v = n(rng);
  const auto y = conv2d_same(x, k);
  REQUIRE(y.channels() == 3);
  for (std::size_t o = 0; o < 3; ++o) {
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 5; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int rr = r + dy, cc = c + dx;
              if (rr < 0 || rr >= 4 || cc < 0 || cc >= 5) continue;
              s += k.at(o, i, dy + 1, dx + 1) * x.at(i, rr, cc);
            }
          }
        }
        CHECK(y.at(o, r, c) == doctest::Approx(s).epsilon(1e-12));
      }
    }
  }
}

}
