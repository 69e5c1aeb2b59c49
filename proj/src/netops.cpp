#include "vceval/netops.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace vceval {

AnchorSet default_anchors() {
  return {{{10, 13}, {16, 30}, {33, 23}, {30, 61}, {62, 45}, {59, 119}, {116, 90}, {156, 198}, {373, 326}}};
}

std::array<AnchorBox, 3> anchors_for_scale(const AnchorSet& anchors, int scale_index) {
  if (scale_index < 0 || scale_index > 2) {
    throw NetopsError(NetopsErrc::OutOfBounds, fmt::format("scale index {} not in 0..2", scale_index));
  }
  const std::size_t base = static_cast<std::size_t>(2 - scale_index) * 3;
  return {anchors[base], anchors[base + 1], anchors[base + 2]};
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw NetopsError(NetopsErrc::EmptyInput, "softmax of an empty vector");
  const double peak = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    total += out[i];
  }
  for (double& o : out) o /= total;
  return out;
}

CenterDetection decode_cell(const RawCellPrediction& raw, const GridCell& cell, const AnchorBox& anchor) {
  if (raw.t_class.empty()) {
    throw NetopsError(NetopsErrc::EmptyInput, "cell prediction carries no class logits");
  }
  CenterDetection d;
  d.center_x = (cell.c_x + sigmoid(raw.t_x)) * cell.stride;
  d.center_y = (cell.c_y + sigmoid(raw.t_y)) * cell.stride;
  d.width = anchor.p_w * std::exp(raw.t_w);
  d.height = anchor.p_h * std::exp(raw.t_h);

  // Multi-label scoring: independent sigmoid per class, best class wins.
  std::size_t best = 0;
  double best_prob = sigmoid(raw.t_class[0]);
  for (std::size_t k = 1; k < raw.t_class.size(); ++k) {
    const double p = sigmoid(raw.t_class[k]);
    if (p > best_prob) {
      best_prob = p;
      best = k;
    }
  }
  d.class_id = static_cast<int>(best);
  d.score = sigmoid(raw.t_obj) * best_prob;
  return d;
}

std::array<int, 3> grid_shape(int input_size) {
  if (input_size <= 0 || input_size % 32 != 0) {
    throw NetopsError(NetopsErrc::NotMultipleOf32,
                      fmt::format("input size {} is not a positive multiple of 32", input_size));
  }
  return {input_size / 32, input_size / 16, input_size / 8};
}

std::size_t class_count_for_channels(std::size_t channels) {
  if (channels % kAnchorsPerScale != 0 || channels / kAnchorsPerScale <= kBoxFields) {
    throw NetopsError(NetopsErrc::ShapeMismatch,
                      fmt::format("{} channels is not 3*(5+K) for any K >= 1", channels));
  }
  return channels / kAnchorsPerScale - kBoxFields;
}

RawCellPrediction cell_prediction(const RawHeadTensor& tensor, std::size_t class_count,
                                  std::size_t anchor, std::size_t y, std::size_t x) {
  const std::size_t base = anchor * (kBoxFields + class_count);
  RawCellPrediction raw;
  raw.t_x = tensor.at(base + 0, y, x);
  raw.t_y = tensor.at(base + 1, y, x);
  raw.t_w = tensor.at(base + 2, y, x);
  raw.t_h = tensor.at(base + 3, y, x);
  raw.t_obj = tensor.at(base + 4, y, x);
  raw.t_class.resize(class_count);
  for (std::size_t k = 0; k < class_count; ++k) raw.t_class[k] = tensor.at(base + kBoxFields + k, y, x);
  return raw;
}

std::vector<Detection> decode_head(const RawHeadTensor& tensor, std::size_t class_count,
                                   std::span<const AnchorBox> anchors, int stride,
                                   double score_threshold) {
  if (class_count == 0 || tensor.channels() != kAnchorsPerScale * (kBoxFields + class_count)) {
    throw NetopsError(NetopsErrc::ShapeMismatch,
                      fmt::format("head tensor has {} channels, expected 3*(5+{}) = {}", tensor.channels(),
                                  class_count, kAnchorsPerScale * (kBoxFields + class_count)));
  }
  if (anchors.size() != kAnchorsPerScale) {
    throw NetopsError(NetopsErrc::ShapeMismatch, "decode_head needs exactly three anchors");
  }
  if (tensor.height() == 0 || tensor.width() == 0) {
    throw NetopsError(NetopsErrc::ShapeMismatch, "head tensor has an empty grid");
  }

  std::vector<Detection> out;
  for (std::size_t y = 0; y < tensor.height(); ++y) {
    for (std::size_t x = 0; x < tensor.width(); ++x) {
      const GridCell cell{static_cast<int>(x), static_cast<int>(y), stride};
      for (std::size_t a = 0; a < kAnchorsPerScale; ++a) {
        const CenterDetection d = decode_cell(cell_prediction(tensor, class_count, a, y, x), cell, anchors[a]);
        if (d.score >= score_threshold) out.push_back(d.to_detection());
      }
    }
  }
  return out;
}

std::vector<GridCell> assign_responsible_cells(std::span<const GroundTruthBox> gt, int grid_side,
                                               int input_size) {
  if (grid_side <= 0 || input_size <= 0 || input_size % grid_side != 0) {
    throw NetopsError(NetopsErrc::ShapeMismatch,
                      fmt::format("grid side {} does not divide input size {}", grid_side, input_size));
  }
  const int stride = input_size / grid_side;
  std::vector<GridCell> cells;
  cells.reserve(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double cx = gt[i].box.center_x();
    const double cy = gt[i].box.center_y();
    const double col = std::floor(cx / stride);
    const double row = std::floor(cy / stride);
    if (!(col >= 0 && row >= 0 && col < grid_side && row < grid_side)) {
      throw NetopsError(NetopsErrc::OutOfBounds,
                        fmt::format("ground truth {} center ({}, {}) lies outside the {}px input", i, cx, cy,
                                    input_size));
    }
    cells.push_back({static_cast<int>(col), static_cast<int>(row), stride});
  }
  return cells;
}

BatchNormParams BatchNormParams::identity(std::size_t channels, double epsilon) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0),
          std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0), epsilon};
}

ConvKernel ConvKernel::zeros(std::size_t out_ch, std::size_t in_ch, std::size_t kh, std::size_t kw) {
  return {out_ch, in_ch, kh, kw, std::vector<double>(out_ch * in_ch * kh * kw, 0.0)};
}

FeatureMap batch_norm(const FeatureMap& x, const BatchNormParams& bn) {
  const std::size_t c = x.channels();
  if (bn.mean.size() != c || bn.variance.size() != c || bn.scale.size() != c || bn.shift.size() != c) {
    throw NetopsError(NetopsErrc::ShapeMismatch, "batch-norm parameter count does not match channel count");
  }
  FeatureMap out(c, x.height(), x.width());
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (bn.variance[ch] < 0.0) throw NetopsError(NetopsErrc::ShapeMismatch, "negative batch-norm variance");
    const double inv_std = 1.0 / std::sqrt(bn.variance[ch] + bn.epsilon);
    for (std::size_t y = 0; y < x.height(); ++y) {
      for (std::size_t xx = 0; xx < x.width(); ++xx) {
        out.at(ch, y, xx) = (x.at(ch, y, xx) - bn.mean[ch]) * inv_std * bn.scale[ch] + bn.shift[ch];
      }
    }
  }
  return out;
}

FeatureMap conv2d_same(const FeatureMap& x, const ConvKernel& k) {
  if (k.in_channels != x.channels() || k.kernel_h % 2 == 0 || k.kernel_w % 2 == 0 ||
      k.weights.size() != k.out_channels * k.in_channels * k.kernel_h * k.kernel_w) {
    throw NetopsError(NetopsErrc::ShapeMismatch, "convolution kernel incompatible with input");
  }
  const auto h = static_cast<std::ptrdiff_t>(x.height());
  const auto w = static_cast<std::ptrdiff_t>(x.width());
  const auto ry = static_cast<std::ptrdiff_t>(k.kernel_h / 2);
  const auto rx = static_cast<std::ptrdiff_t>(k.kernel_w / 2);
  FeatureMap out(k.out_channels, x.height(), x.width());
  for (std::size_t o = 0; o < k.out_channels; ++o) {
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (std::size_t i = 0; i < k.in_channels; ++i) {
          for (std::ptrdiff_t ky = -ry; ky <= ry; ++ky) {
            const std::ptrdiff_t sy = y + ky;
            if (sy < 0 || sy >= h) continue;
            for (std::ptrdiff_t kx = -rx; kx <= rx; ++kx) {
              const std::ptrdiff_t sx = xx + kx;
              if (sx < 0 || sx >= w) continue;
              acc += k.at(o, i, static_cast<std::size_t>(ky + ry), static_cast<std::size_t>(kx + rx)) *
                     x.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
          }
        }
        out.at(o, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = acc;
      }
    }
  }
  return out;
}

namespace {

FeatureMap relu_map(FeatureMap x) {
  for (double& v : x.values()) v = relu(v);
  return x;
}

}  // namespace

FeatureMap residual_block_forward(const FeatureMap& y_prev, const ResidualBlockWeights& w) {
  if (w.w_prime.in_channels != y_prev.channels() || w.w.out_channels != y_prev.channels() ||
      w.w.in_channels != w.w_prime.out_channels) {
    throw NetopsError(NetopsErrc::ShapeMismatch, "residual block weights do not preserve the channel count");
  }
  const FeatureMap inner = conv2d_same(relu_map(batch_norm(y_prev, w.bn_in)), w.w_prime);
  const FeatureMap f = conv2d_same(relu_map(batch_norm(inner, w.bn_mid)), w.w);

  FeatureMap out = y_prev;
  auto dst = out.values();
  auto src = f.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

}  // namespace vceval
