#include "vceval/config.hpp"

#include <cmath>
#include <set>

#include <fmt/core.h>

#include "vceval/dataio.hpp"

namespace vceval {

namespace {

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(fmt::format("{} must lie in [0, 1], got {}", name, v));
}

}  // namespace

void HarnessConfig::validate() const {
  if (input_size <= 0 || input_size % 32 != 0) {
    throw ConfigError(fmt::format("input_size must be a positive multiple of 32, got {}", input_size));
  }
  check_unit(score_threshold, "score_threshold");
  check_unit(nms_iou_threshold, "nms_iou_threshold");
  check_unit(eval_iou_threshold, "eval_iou_threshold");
  if (!(min_visibility > 0.0 && min_visibility <= 1.0)) {
    throw ConfigError(fmt::format("min_visibility must lie in (0, 1], got {}", min_visibility));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(fmt::format("alpha must lie in (0, 1), got {}", alpha));
  if (class_names.empty()) throw ConfigError("class_names must not be empty");
  for (const auto& name : class_names) {
    if (name.empty()) throw ConfigError("class names must be non-empty");
  }
  for (const auto& a : anchors) {
    if (!(a.p_w > 0.0 && a.p_h > 0.0) || !std::isfinite(a.p_w) || !std::isfinite(a.p_h)) {
      throw ConfigError("anchors must be positive and finite");
    }
  }
}

nlohmann::json HarnessConfig::to_json() const {
  nlohmann::json anchors_json = nlohmann::json::array();
  for (const auto& a : anchors) anchors_json.push_back({a.p_w, a.p_h});
  return {
      {"input_size", input_size},
      {"score_threshold", score_threshold},
      {"nms_iou_threshold", nms_iou_threshold},
      {"eval_iou_threshold", eval_iou_threshold},
      {"class_names", class_names},
      {"anchors", anchors_json},
      {"min_visibility", min_visibility},
      {"alpha", alpha},
      {"seed", seed},
      {"normality_scope", to_string(normality_scope)},
      {"posthoc", to_string(posthoc)},
  };
}

HarnessConfig HarnessConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"input_size",     "score_threshold", "nms_iou_threshold",
                                              "eval_iou_threshold", "class_names", "anchors",
                                              "min_visibility", "alpha",           "seed",
                                              "normality_scope", "posthoc"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
  }

  HarnessConfig cfg;
  try {
    if (j.contains("input_size")) cfg.input_size = j.at("input_size").get<int>();
    if (j.contains("score_threshold")) cfg.score_threshold = j.at("score_threshold").get<double>();
    if (j.contains("nms_iou_threshold")) cfg.nms_iou_threshold = j.at("nms_iou_threshold").get<double>();
    if (j.contains("eval_iou_threshold")) cfg.eval_iou_threshold = j.at("eval_iou_threshold").get<double>();
    if (j.contains("class_names")) cfg.class_names = j.at("class_names").get<std::vector<std::string>>();
    if (j.contains("min_visibility")) cfg.min_visibility = j.at("min_visibility").get<double>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("normality_scope")) {
      cfg.normality_scope = parse_normality_scope(j.at("normality_scope").get<std::string>());
    }
    if (j.contains("posthoc")) cfg.posthoc = parse_posthoc_policy(j.at("posthoc").get<std::string>());
    if (j.contains("anchors")) {
      const auto& arr = j.at("anchors");
      if (!arr.is_array() || arr.size() != cfg.anchors.size()) {
        throw ConfigError("anchors must be a list of nine [width, height] pairs");
      }
      for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_array() || arr[i].size() != 2) {
          throw ConfigError("anchors must be a list of nine [width, height] pairs");
        }
        cfg.anchors[i] = {arr[i][0].get<double>(), arr[i][1].get<double>()};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config has a value of the wrong type: {}", e.what()));
  } catch (const StatsError& e) {
    throw ConfigError(e.what());
  }
  cfg.validate();
  return cfg;
}

HarnessConfig HarnessConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError&) {
    throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("config file {} is not valid JSON: {}", path.string(), e.what()));
  }
  return from_json(j);
}

}  // namespace vceval
