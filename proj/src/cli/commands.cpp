#include "vceval/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include <fmt/core.h>

#include "vceval/boxgeom.hpp"
#include "vceval/netops.hpp"

namespace vceval::cli {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

void require_dir(const fs::path& dir, const char* what) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw InputError(fmt::format("{} directory {} does not exist", what, dir.string()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(DataErrc::Io, fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
}

std::vector<std::string> sorted_file_names(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string class_name(const std::vector<std::string>& names, int class_id) {
  if (class_id >= 0 && static_cast<std::size_t>(class_id) < names.size()) return names[class_id];
  return std::to_string(class_id);
}

std::vector<std::string> read_id_list(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::vector<std::string> ids;
  for (auto line : split_lines(text)) {
    if (blank(line)) continue;
    auto fields = split_fields(line);
    ids.emplace_back(fields[0]);
  }
  return ids;
}

}  // namespace

// ---- shared formats ---------------------------------------------------------

std::string tile_manifest_header() { return "tile_id,row,col,origin_x,origin_y,tile_size"; }

std::vector<ManifestEntry> read_any_manifest(const fs::path& path) {
  const std::string text = read_text_file(path);
  const auto lines = split_lines(text);
  std::size_t first = 0;
  while (first < lines.size() && blank(lines[first])) ++first;
  if (first == lines.size() || !lines[first].starts_with("tile_id")) return parse_manifest(text);

  std::vector<ManifestEntry> out;
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    const auto f = split_fields(lines[i]);
    int size = 0;
    if (f.size() != 6 || f[0].empty() || !parse_number(f[5], size) || size <= 0) {
      throw DataError(DataErrc::MalformedLine,
                      fmt::format("line {}: tile manifest rows are {}", i + 1, tile_manifest_header()), i + 1);
    }
    out.push_back({std::string(f[0]), size, size});
  }
  return out;
}

std::string observation_csv_header() { return "metric,group,value,run_id"; }

std::string format_observation(const Observation& o) {
  return fmt::format("{},{},{:.10f},{}\n", o.metric, o.group, o.value, o.run_id);
}

std::vector<Observation> parse_observations(std::string_view content) {
  const auto lines = split_lines(content);
  std::size_t i = 0;
  while (i < lines.size() && blank(lines[i])) ++i;
  if (i == lines.size()) return {};

  const auto header = split_fields(lines[i]);
  int col_metric = -1, col_group = -1, col_value = -1, col_run = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "metric") col_metric = static_cast<int>(c);
    else if (header[c] == "group") col_group = static_cast<int>(c);
    else if (header[c] == "value") col_value = static_cast<int>(c);
    else if (header[c] == "run_id") col_run = static_cast<int>(c);
  }
  if (col_metric < 0 || col_group < 0 || col_value < 0) {
    throw DataError(DataErrc::MalformedLine, "observation CSV header must name metric, group and value columns", i + 1);
  }

  std::vector<Observation> rows;
  for (++i; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    const auto f = split_fields(lines[i]);
    const std::size_t line_no = i + 1;
    if (f.size() != header.size()) {
      throw DataError(DataErrc::MalformedLine,
                      fmt::format("line {}: expected {} fields, got {}", line_no, header.size(), f.size()), line_no);
    }
    Observation o;
    o.metric = std::string(f[col_metric]);
    o.group = std::string(f[col_group]);
    if (col_run >= 0) o.run_id = std::string(f[col_run]);
    if (o.metric.empty() || o.group.empty() || !parse_number(f[col_value], o.value) || !std::isfinite(o.value)) {
      throw DataError(DataErrc::MalformedLine, fmt::format("line {}: bad observation row", line_no), line_no);
    }
    rows.push_back(std::move(o));
  }
  return rows;
}

ObservationTable observation_table(std::span<const Observation> rows, const std::string& metric) {
  ObservationTable table;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    auto [it, inserted] = index.try_emplace(r.group, table.groups.size());
    if (inserted) table.groups.push_back({r.group, {}});
    table.groups[it->second].observations.push_back(r.value);
  }
  return table;
}

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["branch"] = to_string(report.branch);
  j["alpha"] = report.alpha;
  j["normality_scope"] = to_string(report.options.normality_scope);
  j["posthoc_policy"] = to_string(report.options.posthoc);
  j["normality"] = nlohmann::json::array();
  for (const auto& n : report.normality) {
    j["normality"].push_back({{"sample", n.label},
                              {"method", n.result.method},
                              {"W", n.result.statistic},
                              {"p_value", n.result.p_value},
                              {"passes", n.result.p_value >= report.alpha}});
  }
  j["omnibus"] = {{"method", report.omnibus.method},
                  {"statistic", report.omnibus.statistic},
                  {"p_value", report.omnibus.p_value},
                  {"df", report.omnibus.df},
                  {"significant", report.omnibus.p_value < report.alpha}};
  j["pairwise"] = nlohmann::json::array();
  for (const auto& p : report.posthoc) {
    nlohmann::json row = {{"level", p.level_a},
                          {"minus_level", p.level_b},
                          {"difference", p.difference},
                          {"std_err_diff", p.std_err_diff},
                          {report.branch == Branch::Parametric ? "q" : "z", p.statistic},
                          {"p_value", p.p_value},
                          {"significant", p.significant_at_alpha}};
    if (p.lower_cl) row["lower_cl"] = *p.lower_cl;
    if (p.upper_cl) row["upper_cl"] = *p.upper_cl;
    j["pairwise"].push_back(std::move(row));
  }
  return j;
}

std::string omnibus_csv(const std::string& metric, const ComparisonReport& report) {
  return fmt::format("metric,test,p_value\n{},{},{:.6f}\n", metric, report.omnibus.method, report.omnibus.p_value);
}

std::string pairwise_csv(const ComparisonReport& report) {
  std::string out;
  if (report.branch == Branch::Parametric) {
    out = "level,minus_level,difference,std_err_diff,lower_cl,upper_cl,p_value\n";
    for (const auto& p : report.posthoc) {
      out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", p.level_a, p.level_b, p.difference,
                         p.std_err_diff, p.lower_cl.value_or(NAN), p.upper_cl.value_or(NAN), p.p_value);
    }
  } else {
    out = "level,minus_level,score_mean_difference,std_err_diff,z,p_value\n";
    for (const auto& p : report.posthoc) {
      out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", p.level_a, p.level_b, p.difference, p.std_err_diff,
                         p.statistic, p.p_value);
    }
  }
  return out;
}

std::string metrics_csv(const MetricReport& report, const std::string& run_id, const std::string& scale,
                        const std::vector<std::string>& class_names) {
  std::string out = "run_id,scale,class,ap30,map30,f1max,tp,fp,fn\n";
  MatchCounts total;
  for (const auto& [cls, cm] : report.per_class) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{},{},{}\n", run_id, scale, class_name(class_names, cls), cm.ap,
                       report.map, cm.f1max.f1, cm.counts.tp, cm.counts.fp, cm.counts.fn);
    total.tp += cm.counts.tp;
    total.fp += cm.counts.fp;
    total.fn += cm.counts.fn;
  }
  out += fmt::format("{},{},all,{:.6f},{:.6f},{:.6f},{},{},{}\n", run_id, scale, report.map, report.map,
                     report.f1_max.f1, total.tp, total.fp, total.fn);
  return out;
}

std::string pr_curve_csv(const MetricReport& report) {
  std::string out = "class_id,score_threshold,recall,precision\n";
  for (const auto& [cls, cm] : report.per_class) {
    for (const auto& p : cm.curve.points) {
      out += fmt::format("{},{:.6f},{:.6f},{:.6f}\n", cls, p.score_threshold, p.recall, p.precision);
    }
  }
  return out;
}

// ---- tile -------------------------------------------------------------------

TileSummary cmd_tile(const TileOptions& opt) {
  if (opt.tile_size <= 0 || opt.tile_size % 32 != 0) {
    throw ConfigError(fmt::format("tile size must be a positive multiple of 32, got {}", opt.tile_size));
  }
  if (!(opt.min_visibility > 0.0 && opt.min_visibility <= 1.0)) {
    throw ConfigError(fmt::format("min_visibility must lie in (0, 1], got {}", opt.min_visibility));
  }
  require_dir(opt.labels_dir, "labels");
  const auto manifest = parse_manifest(read_text_file(opt.manifest));

  std::string tiles_csv = tile_manifest_header() + "\n";
  std::string dead_csv = "tile_id,valid_width,valid_height\n";
  std::map<std::string, std::string> label_files;
  TileSummary summary;

  for (const auto& entry : manifest) {
    const auto label_path = opt.labels_dir / (entry.image_id + ".txt");
    if (!fs::exists(label_path)) throw InputError(fmt::format("missing label file {}", label_path.string()));
    const auto gts = parse_label_file(read_text_file(label_path), entry.width, entry.height);
    summary.annotations_in += gts.size();
    ++summary.images;

    const TileLayout layout = plan_tiles(entry.width, entry.height, opt.tile_size, opt.policy);
    std::map<std::pair<int, int>, std::vector<GroundTruthBox>> per_tile;
    for (const auto& gt : gts) {
      for (const auto& t : layout.tiles()) {
        if (auto local = remap_to_tile(gt, t, opt.tile_size, opt.min_visibility)) {
          per_tile[{t.row, t.col}].push_back(*local);
          ++summary.annotations_kept;
        }
      }
    }
    for (const auto& t : layout.tiles()) {
      const std::string id = tile_id(entry.image_id, t);
      tiles_csv += fmt::format("{},{},{},{},{},{}\n", id, t.row, t.col, t.origin_x, t.origin_y, opt.tile_size);
      dead_csv += fmt::format("{},{},{}\n", id, layout.valid_width(t), layout.valid_height(t));
      const auto& boxes = per_tile[{t.row, t.col}];
      label_files[id] = write_label_file(boxes, opt.tile_size, opt.tile_size);
      ++summary.tiles;
    }
  }

  ensure_dir(opt.out_dir / "labels");
  for (const auto& [id, content] : label_files) write_file_atomic(opt.out_dir / "labels" / (id + ".txt"), content);
  write_file_atomic(opt.out_dir / "tiles.dead_space.csv", dead_csv);
  write_file_atomic(opt.out_dir / "tiles.csv", tiles_csv);
  return summary;
}

// ---- split ------------------------------------------------------------------

std::pair<int, int> parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  int a = 0, b = 0;
  if (colon == std::string::npos || !parse_number(std::string_view(text).substr(0, colon), a) ||
      !parse_number(std::string_view(text).substr(colon + 1), b) || a <= 0 || b <= 0) {
    throw ConfigError(fmt::format("ratio must look like 4:1, got '{}'", text));
  }
  return {a, b};
}

DatasetSplit cmd_split(const SplitOptions& opt) {
  if (opt.ratio_train <= 0 || opt.ratio_test <= 0) {
    throw ConfigError("split ratio parts must be positive");
  }
  const auto manifest = read_any_manifest(opt.manifest);
  std::vector<std::string> ids;
  ids.reserve(manifest.size());
  for (const auto& e : manifest) ids.push_back(e.image_id);

  const DatasetSplit split = split_dataset(ids, opt.ratio_train, opt.ratio_test, opt.seed);
  std::string train, test;
  for (const auto& id : split.train) train += id + "\n";
  for (const auto& id : split.test) test += id + "\n";
  ensure_dir(opt.out_dir);
  write_file_atomic(opt.out_dir / "train.txt", train);
  write_file_atomic(opt.out_dir / "test.txt", test);
  return split;
}

// ---- decode -----------------------------------------------------------------

DecodeSummary cmd_decode(const DecodeOptions& opt) {
  const HarnessConfig& cfg = opt.config;
  cfg.validate();
  require_dir(opt.tensors_dir, "tensor");

  std::set<std::string> stems;
  for (const auto& name : sorted_file_names(opt.tensors_dir)) {
    for (const char* suffix : {".s0.vct", ".s1.vct", ".s2.vct"}) {
      if (ends_with(name, suffix)) stems.insert(name.substr(0, name.size() - 7));
    }
  }

  const auto grids = grid_shape(cfg.input_size);
  const std::size_t class_count = cfg.class_names.size();
  std::map<std::string, std::string> outputs;
  DecodeSummary summary;

  for (const auto& stem : stems) {
    std::vector<Detection> candidates;
    for (int s = 0; s < 3; ++s) {
      const auto path = opt.tensors_dir / fmt::format("{}.s{}.vct", stem, s);
      if (!fs::exists(path)) continue;
      const RawHeadTensor tensor = read_tensor(read_binary_file(path));
      const auto side = static_cast<std::size_t>(grids[s]);
      if (tensor.height() != side || tensor.width() != side) {
        throw NetopsError(NetopsErrc::ShapeMismatch,
                          fmt::format("{}: expected a {}x{} grid, got {}x{}", path.string(), side, side,
                                      tensor.height(), tensor.width()));
      }
      if (class_count_for_channels(tensor.channels()) != class_count) {
        throw NetopsError(NetopsErrc::ShapeMismatch,
                          fmt::format("{}: {} channels do not fit {} classes", path.string(), tensor.channels(),
                                      class_count));
      }
      const auto anchors = anchors_for_scale(cfg.anchors, s);
      const auto dets = decode_head(tensor, class_count, anchors, cfg.input_size / grids[s], cfg.score_threshold);
      candidates.insert(candidates.end(), dets.begin(), dets.end());
    }
    summary.candidates += candidates.size();

    std::vector<Detection> kept;
    for (const auto& d : nms(candidates, cfg.nms_iou_threshold)) {
      if (auto clipped = clip_to(d.box, cfg.input_size, cfg.input_size)) kept.push_back({*clipped, d.class_id, d.score});
    }
    summary.kept += kept.size();
    ++summary.images;
    outputs[stem] = write_detection_file(kept);
  }

  ensure_dir(opt.out_dir);
  for (const auto& [stem, content] : outputs) write_file_atomic(opt.out_dir / (stem + ".det.txt"), content);
  return summary;
}

// ---- eval -------------------------------------------------------------------

MetricReport cmd_eval(const EvalOptions& opt) {
  const HarnessConfig& cfg = opt.config;
  cfg.validate();
  require_dir(opt.detections_dir, "detections");
  require_dir(opt.labels_dir, "labels");

  std::set<std::string> det_stems, label_stems;
  for (const auto& name : sorted_file_names(opt.detections_dir)) {
    if (ends_with(name, ".det.txt")) det_stems.insert(name.substr(0, name.size() - 8));
  }
  for (const auto& name : sorted_file_names(opt.labels_dir)) {
    if (ends_with(name, ".txt") && !ends_with(name, ".det.txt")) label_stems.insert(name.substr(0, name.size() - 4));
  }

  std::vector<std::string> ids;
  if (opt.id_list) {
    ids = read_id_list(*opt.id_list);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  } else {
    for (const auto& s : det_stems) {
      if (!label_stems.contains(s)) throw InputError(fmt::format("detection file for '{}' has no label file", s));
    }
    for (const auto& s : label_stems) {
      if (!det_stems.contains(s)) throw InputError(fmt::format("label file for '{}' has no detection file", s));
    }
    ids.assign(det_stems.begin(), det_stems.end());
  }
  if (ids.empty()) throw InputError("no images to evaluate");

  std::map<std::string, std::pair<int, int>> sizes;
  if (opt.manifest) {
    for (const auto& e : read_any_manifest(*opt.manifest)) sizes[e.image_id] = {e.width, e.height};
  }

  std::vector<EvalImage> images;
  for (const auto& id : ids) {
    if (!det_stems.contains(id) || !label_stems.contains(id)) {
      throw InputError(fmt::format("image '{}' lacks a paired detection and label file", id));
    }
    int w = cfg.input_size, h = cfg.input_size;
    if (opt.manifest) {
      const auto it = sizes.find(id);
      if (it == sizes.end()) throw InputError(fmt::format("image '{}' is not in the manifest", id));
      std::tie(w, h) = it->second;
    }
    EvalImage img;
    img.image_id = id;
    img.detections = parse_detection_file(read_text_file(opt.detections_dir / (id + ".det.txt")));
    img.ground_truths = parse_label_file(read_text_file(opt.labels_dir / (id + ".txt")), w, h);
    images.push_back(std::move(img));
  }

  const MetricReport report = evaluate(images, cfg.eval_iou_threshold);

  nlohmann::json j;
  j["run_id"] = opt.run_id;
  j["scale"] = opt.scale;
  j["images"] = images.size();
  j["iou_threshold"] = report.iou_threshold;
  j["map30"] = report.map;
  j["f1max"] = {{"f1", report.f1_max.f1}, {"at_threshold", report.f1_max.at_threshold}};
  j["empty_detection_precision"] = report.empty_detection_precision;
  j["per_class"] = nlohmann::json::array();
  for (const auto& [cls, cm] : report.per_class) {
    j["per_class"].push_back({{"class_id", cls},
                              {"class", class_name(cfg.class_names, cls)},
                              {"ap30", cm.ap},
                              {"f1max", cm.f1max.f1},
                              {"f1max_threshold", cm.f1max.at_threshold},
                              {"tp", cm.counts.tp},
                              {"fp", cm.counts.fp},
                              {"fn", cm.counts.fn},
                              {"ground_truth", cm.curve.total_ground_truth}});
  }
  j["config"] = cfg.to_json();

  ensure_dir(opt.out_dir);
  write_file_atomic(opt.out_dir / "metrics.csv", metrics_csv(report, opt.run_id, opt.scale, cfg.class_names));
  write_file_atomic(opt.out_dir / "pr_curve.csv", pr_curve_csv(report));
  write_file_atomic(opt.out_dir / "metrics.json", j.dump(2) + "\n");

  if (opt.observations) {
    std::vector<Observation> rows;
    if (fs::exists(*opt.observations)) rows = parse_observations(read_text_file(*opt.observations));
    rows.push_back({"map30", opt.scale, report.map, opt.run_id});
    rows.push_back({"f1max", opt.scale, report.f1_max.f1, opt.run_id});
    for (const auto& [cls, cm] : report.per_class) {
      const auto name = class_name(cfg.class_names, cls);
      rows.push_back({"ap30:" + name, opt.scale, cm.ap, opt.run_id});
      rows.push_back({"f1max:" + name, opt.scale, cm.f1max.f1, opt.run_id});
    }
    std::string out = observation_csv_header() + "\n";
    for (const auto& r : rows) out += format_observation(r);
    if (opt.observations->has_parent_path()) ensure_dir(opt.observations->parent_path());
    write_file_atomic(*opt.observations, out);
  }
  return report;
}

// ---- compare / report -------------------------------------------------------

namespace {

CompareOptions compare_options(const HarnessConfig& cfg) {
  CompareOptions o;
  o.alpha = cfg.alpha;
  o.normality_scope = cfg.normality_scope;
  o.posthoc = cfg.posthoc;
  return o;
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (c == ':' || c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s;
}

ComparisonReport compare_table(const ObservationTable& table, const std::string& metric, const HarnessConfig& cfg) {
  if (table.groups.empty()) throw InputError(fmt::format("no observations for metric '{}'", metric));
  try {
    table.validate();
  } catch (const StatsError& e) {
    throw InputError(fmt::format("metric '{}': {}", metric, e.what()));
  }
  return compare_pipeline(table, compare_options(cfg));
}

}  // namespace

ComparisonReport cmd_compare(const CompareCmdOptions& opt) {
  opt.config.validate();
  const auto rows = parse_observations(read_text_file(opt.observations));
  const auto report = compare_table(observation_table(rows, opt.metric), opt.metric, opt.config);

  nlohmann::json j = to_json(report);
  j["metric"] = opt.metric;
  j["config"] = opt.config.to_json();

  const std::string stem = "compare_" + file_safe(opt.metric);
  ensure_dir(opt.out_dir);
  write_file_atomic(opt.out_dir / (stem + ".json"), j.dump(2) + "\n");
  write_file_atomic(opt.out_dir / (stem + ".omnibus.csv"), omnibus_csv(opt.metric, report));
  write_file_atomic(opt.out_dir / (stem + ".pairwise.csv"), pairwise_csv(report));
  return report;
}

ReportSummary cmd_report(const ReportOptions& opt) {
  opt.config.validate();
  const auto rows = parse_observations(read_text_file(opt.observations));
  std::vector<std::string> metrics;
  for (const auto& r : rows) {
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
  }
  if (metrics.empty()) throw InputError("observation CSV holds no rows");

  ReportSummary summary;
  nlohmann::json j;
  j["metrics"] = nlohmann::json::object();
  std::string table3 = "metric,test,p_value\n";
  for (const auto& metric : metrics) {
    ++summary.metrics;
    try {
      const auto report = compare_table(observation_table(rows, metric), metric, opt.config);
      j["metrics"][metric] = to_json(report);
      table3 += fmt::format("{},{},{:.6f}\n", metric, report.omnibus.method, report.omnibus.p_value);
    } catch (const std::exception& e) {
      ++summary.failed;
      j["metrics"][metric] = {{"error", e.what()}};
    }
  }
  j["config"] = opt.config.to_json();

  ensure_dir(opt.out_dir);
  write_file_atomic(opt.out_dir / "report.json", j.dump(2) + "\n");
  write_file_atomic(opt.out_dir / "table3.csv", table3);
  return summary;
}

}  // namespace vceval::cli
