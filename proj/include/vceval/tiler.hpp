#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vceval/boxgeom.hpp"

namespace vceval {

enum class TilingErrc { NotMultipleOf32, TileLargerThanImage, InvalidDimension };

class TilingError : public std::runtime_error {
 public:
  TilingError(TilingErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  TilingErrc code() const { return code_; }

 private:
  TilingErrc code_;
};

enum class PaddingPolicy { PadEdge, DropPartial };

PaddingPolicy parse_padding_policy(std::string_view name);
const char* to_string(PaddingPolicy policy);

struct TileRef {
  int row = 0;
  int col = 0;
  int origin_x = 0;
  int origin_y = 0;

  friend bool operator==(const TileRef&, const TileRef&) = default;
};

struct TileLayout {
  int source_w = 0;
  int source_h = 0;
  int tile_size = 0;
  int columns = 0;
  int rows = 0;
  PaddingPolicy padding_policy = PaddingPolicy::PadEdge;

  int tile_count() const { return columns * rows; }
  TileRef tile(int row, int col) const;
  /// Row-major list of every tile.
  std::vector<TileRef> tiles() const;
  /// Width/height of the tile that overlaps the source image; the rest is
  /// dead space under pad-edge.
  int valid_width(const TileRef& t) const;
  int valid_height(const TileRef& t) const;
  /// Tile whose square contains the point, if any.
  std::optional<TileRef> tile_containing(double x, double y) const;
};

/// Non-overlapping grid of square tiles. Pad-edge uses ceil() and may run past
/// the right/bottom edges; drop-partial uses floor() and keeps only full tiles.
TileLayout plan_tiles(int source_w, int source_h, int tile_size, PaddingPolicy policy);

/// Tile-local copy of `gt` clipped to the tile square, or empty when less
/// than `min_visibility` of its area survives the clip.
std::optional<GroundTruthBox> remap_to_tile(const GroundTruthBox& gt, const TileRef& tile, int tile_size,
                                            double min_visibility);

BoundingBox tile_to_global(const BoundingBox& box, const TileRef& tile);

/// `<image_id>_r<row>_c<col>`
std::string tile_id(std::string_view image_id, const TileRef& tile);

inline constexpr double kDefaultMinVisibility = 0.3;

}  // namespace vceval
