#include "vceval/tiler.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace vceval {

PaddingPolicy parse_padding_policy(std::string_view name) {
  if (name == "pad-edge") return PaddingPolicy::PadEdge;
  if (name == "drop-partial") return PaddingPolicy::DropPartial;
  throw TilingError(TilingErrc::InvalidDimension, fmt::format("unknown padding policy '{}'", name));
}

const char* to_string(PaddingPolicy policy) {
  return policy == PaddingPolicy::PadEdge ? "pad-edge" : "drop-partial";
}

TileRef TileLayout::tile(int row, int col) const {
  return {row, col, col * tile_size, row * tile_size};
}

std::vector<TileRef> TileLayout::tiles() const {
  std::vector<TileRef> out;
  out.reserve(static_cast<std::size_t>(tile_count()));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < columns; ++c) out.push_back(tile(r, c));
  }
  return out;
}

int TileLayout::valid_width(const TileRef& t) const {
  return std::clamp(source_w - t.origin_x, 0, tile_size);
}

int TileLayout::valid_height(const TileRef& t) const {
  return std::clamp(source_h - t.origin_y, 0, tile_size);
}

std::optional<TileRef> TileLayout::tile_containing(double x, double y) const {
  if (!(x >= 0.0 && y >= 0.0)) return std::nullopt;
  const auto col = static_cast<long long>(std::floor(x / tile_size));
  const auto row = static_cast<long long>(std::floor(y / tile_size));
  if (col >= columns || row >= rows) return std::nullopt;
  return tile(static_cast<int>(row), static_cast<int>(col));
}

TileLayout plan_tiles(int source_w, int source_h, int tile_size, PaddingPolicy policy) {
  if (source_w <= 0 || source_h <= 0 || tile_size <= 0) {
    throw TilingError(TilingErrc::InvalidDimension, "image and tile dimensions must be positive");
  }
  if (tile_size % 32 != 0) {
    throw TilingError(TilingErrc::NotMultipleOf32, fmt::format("tile size {} is not a multiple of 32", tile_size));
  }
  TileLayout layout{source_w, source_h, tile_size, 0, 0, policy};
  if (policy == PaddingPolicy::PadEdge) {
    layout.columns = (source_w + tile_size - 1) / tile_size;
    layout.rows = (source_h + tile_size - 1) / tile_size;
  } else {
    layout.columns = source_w / tile_size;
    layout.rows = source_h / tile_size;
    if (layout.columns == 0 || layout.rows == 0) {
      throw TilingError(TilingErrc::TileLargerThanImage,
                        fmt::format("no full {}px tile fits in a {}x{} image", tile_size, source_w, source_h));
    }
  }
  return layout;
}

std::optional<GroundTruthBox> remap_to_tile(const GroundTruthBox& gt, const TileRef& tile, int tile_size,
                                            double min_visibility) {
  const BoundingBox local{gt.box.x_min - tile.origin_x, gt.box.y_min - tile.origin_y, gt.box.width,
                          gt.box.height};
  const auto clipped = clip_to(local, tile_size, tile_size);
  if (!clipped) return std::nullopt;
  if (clipped->area() / gt.box.area() < min_visibility) return std::nullopt;
  return GroundTruthBox{*clipped, gt.class_id};
}

BoundingBox tile_to_global(const BoundingBox& box, const TileRef& tile) {
  return {box.x_min + tile.origin_x, box.y_min + tile.origin_y, box.width, box.height};
}

std::string tile_id(std::string_view image_id, const TileRef& tile) {
  return fmt::format("{}_r{}_c{}", image_id, tile.row, tile.col);
}

}  // namespace vceval
