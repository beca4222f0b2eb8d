#include "mdt3d/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mdt3d/error.hpp"
#include "mdt3d/parallel.hpp"

namespace mdt3d {

using nlohmann::json;

constexpr std::size_t kRecallLevels = 40;

EvalConfig parse_eval_config(std::string_view json_text, const std::string& where) {
  EvalConfig c;
  try {
    const json j = json::parse(json_text);
    if (j.contains("iou_thresholds")) {
      for (const auto& [name, v] : j["iou_thresholds"].items()) {
        auto label = parse_coarse_label(name);
        if (!label) throw ConfigError(where + ": unknown class '" + name + "'");
        c.iou_threshold[index_of(*label)] = v.get<double>();
      }
    }
    if (j.contains("classes")) {
      if (j["classes"].empty()) throw ConfigError(where + ": class subset is empty");
      for (const auto& name : j["classes"]) {
        auto label = parse_coarse_label(name.get<std::string>());
        if (!label) throw ConfigError(where + ": unknown class '" + name.get<std::string>() + "'");
        c.classes.push_back(*label);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  for (double t : c.iou_threshold) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError(where + ": IoU thresholds must be in (0, 1]");
  }
  return c;
}

EvalConfig read_eval_config(const fs::path& path) { return parse_eval_config(read_file(path), path.string()); }

MatchResult match_class(std::span<const Detection> dets, std::span<const GroundTruth> gts, double iou_thresh) {
  MatchResult res;
  res.num_gt = gts.size();
  res.order.resize(dets.size());
  std::iota(res.order.begin(), res.order.end(), std::size_t{0});
  std::stable_sort(res.order.begin(), res.order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

  std::map<std::string_view, std::vector<std::size_t>> by_scan;
  for (std::size_t g = 0; g < gts.size(); ++g) by_scan[gts[g].scan_id].push_back(g);
  std::vector<bool> used(gts.size(), false);

  res.tp.reserve(dets.size());
  for (std::size_t k : res.order) {
    const auto& d = dets[k];
    std::size_t best = gts.size();
    double best_iou = -1.0;
    if (const auto it = by_scan.find(d.scan_id); it != by_scan.end()) {
      for (std::size_t g : it->second) {
        if (used[g]) continue;
        const double iou = iou3d(d.box, gts[g].box);
        if (iou >= iou_thresh && iou > best_iou) {
          best_iou = iou;
          best = g;
        }
      }
    }
    if (best < gts.size()) used[best] = true;
    res.tp.push_back(best < gts.size());
  }
  return res;
}

double ap40(const std::vector<bool>& tp_flags, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  // Best precision among PR points reaching each recall level; recall is
  // compared in integers (tp * 40 >= r * num_gt) to avoid rounding at r/40.
  std::vector<double> best(kRecallLevels + 1, 0.0);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    if (tp_flags[i]) ++tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    const std::size_t reached = std::min(kRecallLevels, tp * kRecallLevels / num_gt);
    for (std::size_t r = 1; r <= reached; ++r) best[r] = std::max(best[r], precision);
  }
  double sum = 0.0;
  for (std::size_t r = 1; r <= kRecallLevels; ++r) sum += best[r];
  return sum / static_cast<double>(kRecallLevels);
}

double mean_ap(std::span<const ClassReport> classes) {
  if (classes.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& cr : classes) sum += cr.ap;
  return sum / static_cast<double>(classes.size());
}

EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                    std::span<const std::string> scan_ids, const EvalConfig& config) {
  const std::set<std::string_view> known(scan_ids.begin(), scan_ids.end());
  for (const auto& d : dets) {
    if (!known.contains(d.scan_id)) throw DataError("detection references unknown scan '" + d.scan_id + "'");
  }
  PerClass<std::vector<Detection>> det_by{};
  PerClass<std::vector<GroundTruth>> gt_by{};
  for (const auto& d : dets) det_by[index_of(require_coarse_label(d.box.label))].push_back(d);
  for (const auto& g : gts) gt_by[index_of(require_coarse_label(g.box.label))].push_back(g);

  EvalReport report;
  std::vector<CoarseLabel> classes = config.classes;
  if (classes.empty()) {
    for (CoarseLabel c : kAllCoarseLabels) {
      if (!gt_by[index_of(c)].empty()) classes.push_back(c);
    }
  }
  for (CoarseLabel c : classes) {
    const std::size_t ci = index_of(c);
    const auto m = match_class(det_by[ci], gt_by[ci], config.iou_threshold[ci]);
    ClassReport cr;
    cr.label = c;
    cr.num_gt = m.num_gt;
    cr.num_det = m.tp.size();
    cr.tp = static_cast<std::size_t>(std::count(m.tp.begin(), m.tp.end(), true));
    cr.fp = cr.num_det - cr.tp;
    cr.undefined = m.num_gt == 0;
    cr.ap = ap40(m.tp, m.num_gt);
    report.classes.push_back(cr);
  }
  report.map = mean_ap(report.classes);
  return report;
}

std::vector<GroundTruth> load_ground_truth(const DatasetManifest& manifest, std::size_t workers) {
  std::vector<std::vector<Box3D>> labels(manifest.size());
  parallel_for(manifest.size(), workers, [&](std::size_t i) { labels[i] = load_scan_labels(manifest, i); });
  std::vector<GroundTruth> gts;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    for (auto& b : labels[i]) gts.push_back({manifest.scans[i].scan_id, std::move(b)});
  }
  return gts;
}

EvalReport evaluate(std::span<const Detection> dets, const DatasetManifest& gt, const EvalConfig& config,
                    std::size_t workers) {
  const auto gts = load_ground_truth(gt, workers);
  std::vector<std::string> ids;
  for (const auto& e : gt.scans) ids.push_back(e.scan_id);
  return evaluate(dets, gts, ids, config);
}

std::vector<Detection> parse_detections(std::string_view text, const std::string& where) {
  std::vector<Detection> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const std::string loc = where + ":" + std::to_string(line_no);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;
    line.remove_prefix(first);
    // scan_id, then confidence sits between class and the box fields.
    const auto sp1 = line.find_first_of(" \t");
    if (sp1 == std::string_view::npos) throw DataError(loc + ": expected 10 fields");
    Detection d;
    d.scan_id = std::string(line.substr(0, sp1));
    std::istringstream ls{std::string(line.substr(sp1))};
    std::string cls, conf;
    if (!(ls >> cls >> conf)) throw DataError(loc + ": expected 10 fields");
    std::string rest;
    std::getline(ls, rest);
    auto c = parse_double(conf);
    if (!c || !std::isfinite(*c)) throw DataError(loc + ": bad confidence '" + conf + "'");
    d.confidence = *c;
    d.box = parse_box_line(cls + rest, loc);
    require_coarse_label(d.box.label);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> read_detections(const fs::path& path) {
  return parse_detections(read_file(path), path.string());
}

std::string format_detections(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    const std::string box = format_box_line(d.box);
    const auto sp = box.find(' ');
    out += d.scan_id + ' ' + box.substr(0, sp) + ' ' + format_double(d.confidence) + box.substr(sp) + '\n';
  }
  return out;
}

std::string format_report_text(const EvalReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %8s %7s %7s %7s %7s\n", "class", "AP@R40", "gt", "det", "tp", "fp");
  out += line;
  for (const auto& c : report.classes) {
    std::snprintf(line, sizeof line, "%-14s %8.4f %7zu %7zu %7zu %7zu%s\n", std::string(to_string(c.label)).c_str(),
                  c.ap, c.num_gt, c.num_det, c.tp, c.fp, c.undefined ? "  (undefined: no ground truth)" : "");
    out += line;
  }
  std::snprintf(line, sizeof line, "%-14s %8.4f\n", "mAP", report.map);
  out += line;
  return out;
}

std::string format_report_kv(const EvalReport& report) {
  std::string out;
  char buf[64];
  for (const auto& c : report.classes) {
    const std::string k(to_string(c.label));
    std::snprintf(buf, sizeof buf, "%.4f", c.ap);
    out += "ap." + k + "=" + buf + "\n";
    out += "undefined." + k + "=" + (c.undefined ? "1" : "0") + "\n";
    out += "gt." + k + "=" + std::to_string(c.num_gt) + "\n";
    out += "det." + k + "=" + std::to_string(c.num_det) + "\n";
    out += "tp." + k + "=" + std::to_string(c.tp) + "\n";
    out += "fp." + k + "=" + std::to_string(c.fp) + "\n";
  }
  std::snprintf(buf, sizeof buf, "%.4f", report.map);
  out += std::string("mAP=") + buf + "\n";
  return out;
}

}  // namespace mdt3d

namespace mdt3d {

std::vector<Detection> echo_ground_truth(std::span<const GroundTruth> gts) {
  std::vector<Detection> out;
  out.reserve(gts.size());
  for (const auto& g : gts) out.push_back({g.scan_id, g.box, 1.0});
  return out;
}

}  // namespace mdt3d
