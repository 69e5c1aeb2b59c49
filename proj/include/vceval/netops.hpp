#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vceval/boxgeom.hpp"

namespace vceval {

enum class NetopsErrc { NotMultipleOf32, ShapeMismatch, OutOfBounds, EmptyInput };

class NetopsError : public std::runtime_error {
 public:
  NetopsError(NetopsErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  NetopsErrc code() const { return code_; }

 private:
  NetopsErrc code_;
};

/// Dense channel-major 3-D array; element (c, y, x) lives at c*H*W + y*W + x.
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
      : channels_(channels), height_(height), width_(width),
        values_(channels * height * width, fill) {}
  Tensor3(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> values)
      : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != channels_ * height_ * width_) {
      throw NetopsError(NetopsErrc::ShapeMismatch, "tensor value count does not match its shape");
    }
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  T& at(std::size_t c, std::size_t y, std::size_t x) {
    return values_[(c * height_ + y) * width_ + x];
  }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * height_ + y) * width_ + x];
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool same_shape(const Tensor3& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> values_;
};

/// Raw detector-head activations for one scale. Channel layout per anchor a:
/// a*(5+K) + {0:t_x, 1:t_y, 2:t_w, 3:t_h, 4:t_obj, 5..5+K-1: class logits}.
using RawHeadTensor = Tensor3<float>;
using FeatureMap = Tensor3<double>;

inline constexpr std::size_t kAnchorsPerScale = 3;
inline constexpr std::size_t kBoxFields = 5;

struct RawCellPrediction {
  double t_x = 0.0;
  double t_y = 0.0;
  double t_w = 0.0;
  double t_h = 0.0;
  double t_obj = 0.0;
  std::vector<double> t_class;
};

struct AnchorBox {
  double p_w = 0.0;
  double p_h = 0.0;
};

struct GridCell {
  int c_x = 0;
  int c_y = 0;
  int stride = 1;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Decoded prediction in center format, pixel units.
struct CenterDetection {
  double center_x = 0.0;
  double center_y = 0.0;
  double width = 0.0;
  double height = 0.0;
  int class_id = 0;
  double score = 0.0;

  Detection to_detection() const {
    return {BoundingBox::from_center(center_x, center_y, width, height), class_id, score};
  }
};

/// Nine anchors ordered smallest first; the first three belong to the
/// finest grid (stride 8), the last three to the coarsest (stride 32).
using AnchorSet = std::array<AnchorBox, 9>;
AnchorSet default_anchors();

/// Anchors for head scale index 0 (stride 32), 1 (stride 16) or 2 (stride 8).
std::array<AnchorBox, 3> anchors_for_scale(const AnchorSet& anchors, int scale_index);

double sigmoid(double x);
double relu(double x);
std::vector<double> softmax(std::span<const double> v);

CenterDetection decode_cell(const RawCellPrediction& raw, const GridCell& cell, const AnchorBox& anchor);

/// Grid side lengths for strides 32, 16 and 8.
std::array<int, 3> grid_shape(int input_size);

/// Class count implied by a head tensor's channel dimension.
std::size_t class_count_for_channels(std::size_t channels);

/// Reads the prediction of one (cell, anchor) pair out of a head tensor.
RawCellPrediction cell_prediction(const RawHeadTensor& tensor, std::size_t class_count,
                                  std::size_t anchor, std::size_t y, std::size_t x);

/// Decodes every (cell, anchor) pair, keeping detections with score at or
/// above `score_threshold`. Output order is row, column, anchor.
std::vector<Detection> decode_head(const RawHeadTensor& tensor, std::size_t class_count,
                                   std::span<const AnchorBox> anchors, int stride,
                                   double score_threshold);

/// Cell containing each ground truth's center on a grid of `grid_side`
/// cells over a square input of `input_size` pixels.
std::vector<GridCell> assign_responsible_cells(std::span<const GroundTruthBox> gt, int grid_side,
                                               int input_size);

struct BatchNormParams {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> scale;
  std::vector<double> shift;
  double epsilon = 1e-5;

  static BatchNormParams identity(std::size_t channels, double epsilon = 1e-5);
};

/// Convolution kernel [out][in][kh][kw]; odd spatial size, stride 1, same padding.
struct ConvKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::vector<double> weights;

  static ConvKernel zeros(std::size_t out_ch, std::size_t in_ch, std::size_t kh, std::size_t kw);
  double& at(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return weights[((o * in_channels + i) * kernel_h + ky) * kernel_w + kx];
  }
  double at(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + i) * kernel_h + ky) * kernel_w + kx];
  }
};

/// f(y) = W * relu(bn_mid(W' * relu(bn_in(y)))), output f(y) + y.
struct ResidualBlockWeights {
  ConvKernel w_prime;  // in -> mid
  ConvKernel w;        // mid -> in
  BatchNormParams bn_in;
  BatchNormParams bn_mid;
};

FeatureMap batch_norm(const FeatureMap& x, const BatchNormParams& bn);
FeatureMap conv2d_same(const FeatureMap& x, const ConvKernel& k);
FeatureMap residual_block_forward(const FeatureMap& y_prev, const ResidualBlockWeights& w);

}  // namespace vceval
