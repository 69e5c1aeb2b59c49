#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vceval/config.hpp"
#include "vceval/dataio.hpp"
#include "vceval/metrics.hpp"
#include "vceval/stats.hpp"
#include "vceval/tiler.hpp"

namespace vceval::cli {

namespace fs = std::filesystem;

/// Malformed, missing or unpaired input; the CLI maps it to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- tile -----------------------------------------------------------------

struct TileOptions {
  fs::path manifest;
  fs::path labels_dir;
  fs::path out_dir;
  int tile_size = 416;
  PaddingPolicy policy = PaddingPolicy::PadEdge;
  double min_visibility = kDefaultMinVisibility;
};

struct TileSummary {
  std::size_t images = 0;
  std::size_t tiles = 0;
  std::size_t annotations_in = 0;
  std::size_t annotations_kept = 0;
};

/// Writes `tiles.csv`, `tiles.dead_space.csv` and `labels/<tile_id>.txt`.
TileSummary cmd_tile(const TileOptions& opt);

// ---- split ----------------------------------------------------------------

struct SplitOptions {
  fs::path manifest;
  fs::path out_dir;
  int ratio_train = 4;
  int ratio_test = 1;
  std::uint64_t seed = 0;
};

/// Writes `train.txt` and `test.txt`, one id per line.
DatasetSplit cmd_split(const SplitOptions& opt);

/// Parses "4:1".
std::pair<int, int> parse_ratio(const std::string& text);

// ---- decode ---------------------------------------------------------------

struct DecodeOptions {
  fs::path tensors_dir;
  fs::path out_dir;
  HarnessConfig config;
};

struct DecodeSummary {
  std::size_t images = 0;
  std::size_t candidates = 0;
  std::size_t kept = 0;
};

/// Decodes `<stem>.s{0|1|2}.vct` into `<stem>.det.txt`. Scale 0 is the
/// stride-32 head, 1 stride 16, 2 stride 8; missing scales are skipped.
DecodeSummary cmd_decode(const DecodeOptions& opt);

// ---- eval -----------------------------------------------------------------

struct EvalOptions {
  fs::path detections_dir;
  fs::path labels_dir;
  /// Image or tile manifest giving image sizes; without it every image is
  /// input_size x input_size.
  std::optional<fs::path> manifest;
  /// Restricts evaluation to these ids (e.g. test.txt).
  std::optional<fs::path> id_list;
  fs::path out_dir;
  std::optional<fs::path> observations;
  std::string run_id = "run";
  std::string scale = "S";
  HarnessConfig config;
};

/// Writes `metrics.csv`, `pr_curve.csv` and `metrics.json`; appends one
/// observation row per metric to the observations CSV when given.
MetricReport cmd_eval(const EvalOptions& opt);

// ---- compare / report -----------------------------------------------------

struct CompareCmdOptions {
  fs::path observations;
  std::string metric;
  fs::path out_dir;
  HarnessConfig config;
};

/// Writes `compare_<metric>.json`, `.omnibus.csv` and `.pairwise.csv`.
ComparisonReport cmd_compare(const CompareCmdOptions& opt);

struct ReportOptions {
  fs::path observations;
  fs::path out_dir;
  HarnessConfig config;
};

struct ReportSummary {
  std::size_t metrics = 0;
  std::size_t failed = 0;
};

/// Runs the comparison for every metric; writes `report.json` and `table3.csv`.
ReportSummary cmd_report(const ReportOptions& opt);

// ---- shared file formats --------------------------------------------------

struct Observation {
  std::string metric;
  std::string group;
  double value = 0.0;
  std::string run_id;
};

/// Observation CSV `metric,group,value[,run_id]` with a header row.
std::vector<Observation> parse_observations(std::string_view content);
std::string observation_csv_header();
std::string format_observation(const Observation& o);

/// Groups in order of first appearance.
ObservationTable observation_table(std::span<const Observation> rows, const std::string& metric);

/// Image manifest (`image_id,width,height`) or tile manifest
/// (`tile_id,row,col,origin_x,origin_y,tile_size`).
std::vector<ManifestEntry> read_any_manifest(const fs::path& path);

std::string tile_manifest_header();

nlohmann::json to_json(const ComparisonReport& report);
std::string omnibus_csv(const std::string& metric, const ComparisonReport& report);
std::string pairwise_csv(const ComparisonReport& report);
std::string metrics_csv(const MetricReport& report, const std::string& run_id, const std::string& scale,
                        const std::vector<std::string>& class_names);
std::string pr_curve_csv(const MetricReport& report);

/// CLI entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace vceval::cli
