#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vceval/netops.hpp"
#include "vceval/stats.hpp"

namespace vceval {

/// Invalid configuration value; the CLI maps it to exit code 3.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kConfigEnvVar = "VC_EVAL_CONFIG";

struct HarnessConfig {
  int input_size = 416;
  double score_threshold = 0.30;
  double nms_iou_threshold = 0.45;
  double eval_iou_threshold = 0.30;
  std::vector<std::string> class_names = {"VC", "corn"};
  AnchorSet anchors = default_anchors();
  double min_visibility = 0.3;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  NormalityScope normality_scope = NormalityScope::Pooled;
  PosthocPolicy posthoc = PosthocPolicy::Always;

  void validate() const;
  nlohmann::json to_json() const;
  /// Keys absent from `j` keep their defaults; unknown keys are rejected.
  static HarnessConfig from_json(const nlohmann::json& j);
  static HarnessConfig load(const std::filesystem::path& path);
};

}  // namespace vceval
