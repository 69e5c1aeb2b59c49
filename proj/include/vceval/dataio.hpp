#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vceval/boxgeom.hpp"
#include "vceval/netops.hpp"

namespace vceval {

enum class DataErrc {
  MalformedLine,
  OutOfRange,
  ScoreOutOfRange,
  BadMagic,
  TruncatedPayload,
  ShapeOverflow,
  TrailingBytes,
  NonFiniteValue,
  EmptyDataset,
  InvalidArgument,
  Io,
};

const char* to_string(DataErrc code);

class DataError : public std::runtime_error {
 public:
  DataError(DataErrc code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), code_(code), line_(line) {}
  DataErrc code() const { return code_; }
  /// 1-based line number for text-format errors, 0 otherwise.
  std::size_t line() const { return line_; }

 private:
  DataErrc code_;
  std::size_t line_;
};

struct AnnotatedImage {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthBox> ground_truths;
};

struct ManifestEntry {
  std::string image_id;
  int width = 0;
  int height = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

// Label files: one `class_id cx cy w h` line per box, normalized to [0,1].
std::vector<GroundTruthBox> parse_label_file(std::string_view content, double image_w, double image_h);
std::string write_label_file(std::span<const GroundTruthBox> boxes, double image_w, double image_h);

// Detection files: `class_id score x_min y_min width height` in pixels.
std::vector<Detection> parse_detection_file(std::string_view content);
std::string write_detection_file(std::span<const Detection> dets);

// Tensor files: "VCT1", u32le C, H, W, then C*H*W f32le values.
inline constexpr std::size_t kTensorHeaderBytes = 16;
RawHeadTensor read_tensor(std::span<const std::byte> bytes);
std::vector<std::byte> write_tensor(const RawHeadTensor& tensor);

// Image manifest CSV: `image_id,width,height`, optional header row.
std::vector<ManifestEntry> parse_manifest(std::string_view content);
std::string write_manifest(std::span<const ManifestEntry> entries);

/// Seeded shuffle then prefix split; |test| = round(n * ratio_test / (ratio_train + ratio_test)).
DatasetSplit split_dataset(std::span<const std::string> ids, int ratio_train, int ratio_test,
                           std::uint64_t seed);

// Filesystem helpers shared by the command layer.
std::string read_text_file(const std::filesystem::path& path);
std::vector<std::byte> read_binary_file(const std::filesystem::path& path);
/// Whole-file atomic write: temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> content);

/// Splits text into lines, accepting both "\n" and "\r\n".
std::vector<std::string_view> split_lines(std::string_view content);

}  // namespace vceval
