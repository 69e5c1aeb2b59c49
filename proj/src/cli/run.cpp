#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "vceval/commands.hpp"

namespace vceval::cli {

namespace {

// Flag values are parsed into optionals so that only flags the user passed
// override the config file.
struct Overrides {
  std::optional<int> input_size;
  std::optional<double> score_threshold;
  std::optional<double> nms_iou_threshold;
  std::optional<double> eval_iou_threshold;
  std::optional<double> min_visibility;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> normality_scope;
  std::optional<std::string> posthoc;
};

HarnessConfig effective_config(const std::string& config_path, const Overrides& o) {
  HarnessConfig cfg = config_path.empty() ? HarnessConfig{} : HarnessConfig::load(config_path);
  if (o.input_size) cfg.input_size = *o.input_size;
  if (o.score_threshold) cfg.score_threshold = *o.score_threshold;
  if (o.nms_iou_threshold) cfg.nms_iou_threshold = *o.nms_iou_threshold;
  if (o.eval_iou_threshold) cfg.eval_iou_threshold = *o.eval_iou_threshold;
  if (o.min_visibility) cfg.min_visibility = *o.min_visibility;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.seed) cfg.seed = *o.seed;
  try {
    if (o.normality_scope) cfg.normality_scope = parse_normality_scope(*o.normality_scope);
    if (o.posthoc) cfg.posthoc = parse_posthoc_policy(*o.posthoc);
  } catch (const StatsError& e) {
    throw ConfigError(e.what());
  }
  cfg.validate();
  return cfg;
}

int report_error(const char* kind, const std::exception& e, int code) {
  std::cerr << fmt::format("vceval: {}: {}\n", kind, e.what());
  return code;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Detection evaluation and scale comparison harness"};
  app.require_subcommand(1);

  std::string config_path;
  if (const char* env = std::getenv(kConfigEnvVar)) config_path = env;
  app.add_option("--config", config_path, fmt::format("JSON config file (default: ${})", kConfigEnvVar));

  Overrides ov;
  std::string manifest, labels, out, tensors, detections, ids, observations, metric;
  std::string policy = "pad-edge", ratio = "4:1", run_id = "run", scale = "S";
  std::optional<int> tile_size;

  auto* tile = app.add_subcommand("tile", "Cut images into square tiles and remap their labels");
  tile->add_option("--manifest", manifest, "Image manifest CSV")->required();
  tile->add_option("--labels", labels, "Directory of <image_id>.txt label files")->required();
  tile->add_option("--out", out, "Output directory")->required();
  tile->add_option("--tile-size", tile_size, "Tile side in pixels (default: input_size)");
  tile->add_option("--policy", policy, "pad-edge or drop-partial");
  tile->add_option("--min-visibility", ov.min_visibility, "Minimum visible area fraction");

  auto* split = app.add_subcommand("split", "Seeded train/test split of a manifest");
  split->add_option("--manifest", manifest, "Image or tile manifest CSV")->required();
  split->add_option("--out", out, "Output directory")->required();
  split->add_option("--ratio", ratio, "train:test ratio");
  split->add_option("--seed", ov.seed, "Shuffle seed");

  auto* decode = app.add_subcommand("decode", "Decode head tensors into detection files");
  decode->add_option("--tensors", tensors, "Directory of <stem>.s{0,1,2}.vct files")->required();
  decode->add_option("--out", out, "Output directory")->required();
  decode->add_option("--input-size", ov.input_size, "Network input size");
  decode->add_option("--score-threshold", ov.score_threshold, "Minimum detection score");
  decode->add_option("--nms-iou", ov.nms_iou_threshold, "NMS IoU threshold");

  auto* eval = app.add_subcommand("eval", "Score detection files against labels");
  eval->add_option("--detections", detections, "Directory of <stem>.det.txt files")->required();
  eval->add_option("--labels", labels, "Directory of <stem>.txt label files")->required();
  eval->add_option("--manifest", manifest, "Image or tile manifest giving image sizes");
  eval->add_option("--ids", ids, "File listing the ids to evaluate");
  eval->add_option("--out", out, "Output directory")->required();
  eval->add_option("--observations", observations, "Observation CSV to append to");
  eval->add_option("--run-id", run_id, "Run identifier");
  eval->add_option("--scale", scale, "Group label for the observation rows");
  eval->add_option("--iou", ov.eval_iou_threshold, "Matching IoU threshold");
  eval->add_option("--input-size", ov.input_size, "Image side when no manifest is given");

  auto* compare = app.add_subcommand("compare", "Compare one metric across groups");
  compare->add_option("--observations", observations, "Observation CSV")->required();
  compare->add_option("--metric", metric, "Metric name")->required();
  compare->add_option("--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Compare every metric in an observation CSV");
  report->add_option("--observations", observations, "Observation CSV")->required();
  report->add_option("--out", out, "Output directory")->required();

  for (auto* sub : {compare, report}) {
    sub->add_option("--alpha", ov.alpha, "Significance level");
    sub->add_option("--normality-scope", ov.normality_scope, "pooled or per-group");
    sub->add_option("--posthoc", ov.posthoc, "always or on-significant");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const HarnessConfig cfg = effective_config(config_path, ov);

    if (*tile) {
      TileOptions o;
      o.manifest = manifest;
      o.labels_dir = labels;
      o.out_dir = out;
      o.tile_size = tile_size.value_or(cfg.input_size);
      try {
        o.policy = parse_padding_policy(policy);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
      o.min_visibility = cfg.min_visibility;
      const auto s = cmd_tile(o);
      std::cout << fmt::format("tiles={} images={} annotations_in={} annotations_kept={}\n", s.tiles, s.images,
                               s.annotations_in, s.annotations_kept);
    } else if (*split) {
      SplitOptions o;
      o.manifest = manifest;
      o.out_dir = out;
      std::tie(o.ratio_train, o.ratio_test) = parse_ratio(ratio);
      o.seed = cfg.seed;
      const auto s = cmd_split(o);
      std::cout << fmt::format("train={} test={} seed={}\n", s.train.size(), s.test.size(), s.seed);
    } else if (*decode) {
      const auto s = cmd_decode({tensors, out, cfg});
      std::cout << fmt::format("images={} candidates={} kept={}\n", s.images, s.candidates, s.kept);
    } else if (*eval) {
      EvalOptions o;
      o.detections_dir = detections;
      o.labels_dir = labels;
      if (!manifest.empty()) o.manifest = manifest;
      if (!ids.empty()) o.id_list = ids;
      o.out_dir = out;
      if (!observations.empty()) o.observations = observations;
      o.run_id = run_id;
      o.scale = scale;
      o.config = cfg;
      const auto r = cmd_eval(o);
      std::cout << fmt::format("map30={:.6f} f1max={:.6f} classes={}\n", r.map, r.f1_max.f1, r.per_class.size());
    } else if (*compare) {
      const auto r = cmd_compare({observations, metric, out, cfg});
      std::cout << fmt::format("metric={} branch={} omnibus_p={:.6f} pairs={}\n", metric, to_string(r.branch),
                               r.omnibus.p_value, r.posthoc.size());
    } else if (*report) {
      const auto s = cmd_report({observations, out, cfg});
      std::cout << fmt::format("metrics={} failed={}\n", s.metrics, s.failed);
      if (s.failed > 0) return 2;
    }
  } catch (const ConfigError& e) {
    return report_error("config", e, 3);
  } catch (const TilingError& e) {
    return report_error("tiling", e, e.code() == TilingErrc::TileLargerThanImage ? 2 : 3);
  } catch (const DataError& e) {
    return report_error(to_string(e.code()), e, 2);
  } catch (const NetopsError& e) {
    return report_error("decode", e, 2);
  } catch (const MetricsError& e) {
    return report_error("metrics", e, 2);
  } catch (const StatsError& e) {
    return report_error(to_string(e.code()), e, 2);
  } catch (const InputError& e) {
    return report_error("input", e, 2);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("filesystem", e, 2);
  }
  return 0;
}

}  // namespace vceval::cli
