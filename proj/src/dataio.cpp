#include "vceval/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <fmt/core.h>

namespace vceval {

const char* to_string(DataErrc code) {
  switch (code) {
    case DataErrc::MalformedLine: return "MalformedLine";
    case DataErrc::OutOfRange: return "OutOfRange";
    case DataErrc::ScoreOutOfRange: return "ScoreOutOfRange";
    case DataErrc::BadMagic: return "BadMagic";
    case DataErrc::TruncatedPayload: return "TruncatedPayload";
    case DataErrc::ShapeOverflow: return "ShapeOverflow";
    case DataErrc::TrailingBytes: return "TrailingBytes";
    case DataErrc::NonFiniteValue: return "NonFiniteValue";
    case DataErrc::EmptyDataset: return "EmptyDataset";
    case DataErrc::InvalidArgument: return "InvalidArgument";
    case DataErrc::Io: return "Io";
  }
  return "Unknown";
}

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

[[noreturn]] void malformed(std::size_t line_no, std::string_view why) {
  throw DataError(DataErrc::MalformedLine, fmt::format("line {}: {}", line_no, why), line_no);
}

}  // namespace

std::vector<GroundTruthBox> parse_label_file(std::string_view content, double image_w, double image_h) {
  if (!(image_w > 0.0) || !(image_h > 0.0)) {
    throw DataError(DataErrc::InvalidArgument, "image dimensions must be positive");
  }
  std::vector<GroundTruthBox> boxes;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (skippable(lines[i])) continue;
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 5) malformed(line_no, fmt::format("expected 5 fields, found {}", fields.size()));
    int class_id = 0;
    if (!parse_int(fields[0], class_id) || class_id < 0) malformed(line_no, "class id is not a non-negative integer");
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (!parse_double(fields[k + 1], v[k])) malformed(line_no, "non-numeric coordinate");
    }
    const double cx = v[0], cy = v[1], w = v[2], h = v[3];
    if (cx < 0.0 || cx > 1.0 || cy < 0.0 || cy > 1.0 || !(w > 0.0) || w > 1.0 || !(h > 0.0) || h > 1.0) {
      throw DataError(DataErrc::OutOfRange,
                      fmt::format("line {}: normalized values must lie in [0,1] with positive size", line_no),
                      line_no);
    }
    const BoundingBox raw{(cx - w / 2.0) * image_w, (cy - h / 2.0) * image_h, w * image_w, h * image_h};
    const auto clipped = clip_to(raw, image_w, image_h);
    if (!clipped) {
      throw DataError(DataErrc::OutOfRange, fmt::format("line {}: box lies outside the image", line_no), line_no);
    }
    boxes.push_back({*clipped, class_id});
  }
  return boxes;
}

std::string write_label_file(std::span<const GroundTruthBox> boxes, double image_w, double image_h) {
  std::string out;
  for (const auto& gt : boxes) {
    out += fmt::format("{} {:.10f} {:.10f} {:.10f} {:.10f}\n", gt.class_id, gt.box.center_x() / image_w,
                       gt.box.center_y() / image_h, gt.box.width / image_w, gt.box.height / image_h);
  }
  return out;
}

std::vector<Detection> parse_detection_file(std::string_view content) {
  std::vector<Detection> dets;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (skippable(lines[i])) continue;
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 6) malformed(line_no, fmt::format("expected 6 fields, found {}", fields.size()));
    Detection d;
    if (!parse_int(fields[0], d.class_id) || d.class_id < 0) malformed(line_no, "class id is not a non-negative integer");
    double v[5];
    for (int k = 0; k < 5; ++k) {
      if (!parse_double(fields[k + 1], v[k])) malformed(line_no, "non-numeric field");
    }
    if (v[0] < 0.0 || v[0] > 1.0) {
      throw DataError(DataErrc::ScoreOutOfRange, fmt::format("line {}: score {} not in [0,1]", line_no, v[0]),
                      line_no);
    }
    d.score = v[0];
    d.box = {v[1], v[2], v[3], v[4]};
    if (!d.box.valid()) malformed(line_no, "box width and height must be positive");
    dets.push_back(d);
  }
  return dets;
}

std::string write_detection_file(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    out += fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f}\n", d.class_id, d.score, d.box.x_min, d.box.y_min,
                       d.box.width, d.box.height);
  }
  return out;
}

namespace {

constexpr char kTensorMagic[4] = {'V', 'C', 'T', '1'};

std::uint32_t load_u32le(std::span<const std::byte> b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void store_u32le(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

}  // namespace

RawHeadTensor read_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kTensorMagic), std::end(kTensorMagic), bytes.begin(),
                                      [](char c, std::byte b) { return static_cast<std::byte>(c) == b; })) {
    throw DataError(DataErrc::BadMagic, "tensor data does not start with VCT1");
  }
  if (bytes.size() < kTensorHeaderBytes) {
    throw DataError(DataErrc::TruncatedPayload, "tensor header is incomplete");
  }
  const std::uint64_t c = load_u32le(bytes.subspan(4, 4));
  const std::uint64_t h = load_u32le(bytes.subspan(8, 4));
  const std::uint64_t w = load_u32le(bytes.subspan(12, 4));
  if (c == 0 || h == 0 || w == 0) {
    throw DataError(DataErrc::ShapeOverflow, fmt::format("tensor shape {}x{}x{} is empty", c, h, w));
  }
  // Each dimension is < 2^32, so c*h fits; guard the second product.
  const std::uint64_t ch = c * h;
  if (ch > std::numeric_limits<std::uint64_t>::max() / w ||
      ch * w > (std::numeric_limits<std::size_t>::max() - kTensorHeaderBytes) / 4) {
    throw DataError(DataErrc::ShapeOverflow, fmt::format("tensor shape {}x{}x{} overflows", c, h, w));
  }
  const std::uint64_t count = ch * w;
  const std::size_t payload = bytes.size() - kTensorHeaderBytes;
  // A partial trailing value means the stream was cut; a whole number of
  // values that is still too few means the header over-declares the shape.
  if (payload % 4 != 0) {
    throw DataError(DataErrc::TruncatedPayload,
                    fmt::format("tensor payload of {} bytes ends inside a value", payload));
  }
  if (count > payload / 4) {
    throw DataError(DataErrc::ShapeOverflow,
                    fmt::format("tensor shape {}x{}x{} exceeds the {}-byte payload", c, h, w, payload));
  }
  if (payload != count * 4) {
    throw DataError(DataErrc::TrailingBytes,
                    fmt::format("tensor payload has {} bytes, shape needs {}", payload, count * 4));
  }

  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t raw = load_u32le(bytes.subspan(kTensorHeaderBytes + 4 * i, 4));
    values[i] = std::bit_cast<float>(raw);
    if (!std::isfinite(values[i])) {
      throw DataError(DataErrc::NonFiniteValue, fmt::format("tensor value {} is not finite", i));
    }
  }
  return RawHeadTensor(c, h, w, std::move(values));
}

std::vector<std::byte> write_tensor(const RawHeadTensor& tensor) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (tensor.channels() > kMax || tensor.height() > kMax || tensor.width() > kMax) {
    throw DataError(DataErrc::ShapeOverflow, "tensor dimension does not fit in 32 bits");
  }
  std::vector<std::byte> out;
  out.reserve(kTensorHeaderBytes + 4 * tensor.size());
  for (char c : kTensorMagic) out.push_back(static_cast<std::byte>(c));
  store_u32le(out, static_cast<std::uint32_t>(tensor.channels()));
  store_u32le(out, static_cast<std::uint32_t>(tensor.height()));
  store_u32le(out, static_cast<std::uint32_t>(tensor.width()));
  for (float v : tensor.values()) store_u32le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view content) {
  std::vector<ManifestEntry> entries;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (skippable(lines[i])) continue;
    const auto fields = split_csv(lines[i]);
    if (entries.empty() && !fields.empty() && fields[0] == "image_id") continue;
    if (fields.size() != 3) malformed(line_no, "manifest rows are image_id,width,height");
    ManifestEntry e;
    e.image_id = std::string(fields[0]);
    if (e.image_id.empty()) malformed(line_no, "empty image_id");
    if (!parse_int(fields[1], e.width) || !parse_int(fields[2], e.height) || e.width <= 0 || e.height <= 0) {
      malformed(line_no, "image dimensions must be positive integers");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string write_manifest(std::span<const ManifestEntry> entries) {
  std::string out = "image_id,width,height\n";
  for (const auto& e : entries) out += fmt::format("{},{},{}\n", e.image_id, e.width, e.height);
  return out;
}

DatasetSplit split_dataset(std::span<const std::string> ids, int ratio_train, int ratio_test,
                           std::uint64_t seed) {
  if (ids.empty()) throw DataError(DataErrc::EmptyDataset, "cannot split an empty dataset");
  if (ratio_train <= 0 || ratio_test <= 0) {
    throw DataError(DataErrc::InvalidArgument, "split ratios must be positive");
  }
  std::vector<std::string> shuffled(ids.begin(), ids.end());

  // Fisher-Yates with an explicit unbiased draw: std::shuffle and
  // std::uniform_int_distribution differ across standard libraries.
  std::mt19937_64 rng(seed);
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = 0;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(r % bound)]);
  }

  const std::uint64_t n = shuffled.size();
  const std::uint64_t total = static_cast<std::uint64_t>(ratio_train) + static_cast<std::uint64_t>(ratio_test);
  const std::uint64_t n_test = (2 * n * static_cast<std::uint64_t>(ratio_test) + total) / (2 * total);

  DatasetSplit split;
  split.seed = seed;
  const auto cut = static_cast<std::ptrdiff_t>(n - n_test);
  split.train.assign(shuffled.begin(), shuffled.begin() + cut);
  split.test.assign(shuffled.begin() + cut, shuffled.end());
  return split;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrc::Io, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::byte> read_binary_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<std::byte> out(text.size());
  std::transform(text.begin(), text.end(), out.begin(), [](char c) { return static_cast<std::byte>(c); });
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(DataErrc::Io, fmt::format("cannot write {}", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError(DataErrc::Io, fmt::format("short write to {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> content) {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(content.data()), content.size()));
}

}  // namespace vceval
