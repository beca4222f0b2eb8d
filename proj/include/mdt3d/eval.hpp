#pragma once

#include <span>
#include <string>
#include <vector>

#include "mdt3d/io.hpp"
#include "mdt3d/labels.hpp"

namespace mdt3d {

struct Detection {
  std::string scan_id;
  Box3D box;
  /// Only the ordering of confidences matters.
  double confidence = 0.0;
};

struct GroundTruth {
  std::string scan_id;
  Box3D box;
};

struct EvalConfig {
  PerClass<double> iou_threshold{0.7, 0.7, 0.7, 0.5, 0.5};
  /// Empty selects every class with at least one ground-truth box.
  std::vector<CoarseLabel> classes;
};

EvalConfig read_eval_config(const fs::path& path);
EvalConfig parse_eval_config(std::string_view json_text, const std::string& where = "eval config");

struct MatchResult {
  /// TP flags in confidence-descending order.
  std::vector<bool> tp;
  /// order[k] is the input index of the k-th ranked detection.
  std::vector<std::size_t> order;
  std::size_t num_gt = 0;
};

/// Greedy matching: detections in descending confidence (stable for ties)
/// each claim the unmatched same-scan ground truth of highest IoU, provided
/// it reaches `iou_thresh`.
MatchResult match_class(std::span<const Detection> dets, std::span<const GroundTruth> gts, double iou_thresh);

/// Mean of interpolated precision at recall r/40, r = 1..40. Zero when
/// num_gt is 0.
double ap40(const std::vector<bool>& tp_flags, std::size_t num_gt);

struct ClassReport {
  CoarseLabel label = CoarseLabel::SmallVehicle;
  double ap = 0.0;
  /// Set when the class has no ground truth, making AP undefined (reported as 0).
  bool undefined = false;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
};

/// Arithmetic mean of the class APs; undefined classes contribute 0.
double mean_ap(std::span<const ClassReport> classes);

struct EvalReport {
  std::vector<ClassReport> classes;
  double map = 0.0;
};

/// Ground truth given in memory. `scan_ids` lists every evaluated scan so
/// that detections on unknown scans can be rejected.
EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                    std::span<const std::string> scan_ids, const EvalConfig& config);
/// Ground truth read from a harmonized manifest's label files.
EvalReport evaluate(std::span<const Detection> dets, const DatasetManifest& gt, const EvalConfig& config,
                    std::size_t workers = 1);

std::vector<GroundTruth> load_ground_truth(const DatasetManifest& manifest, std::size_t workers = 1);

/// `scan_id class confidence yaw cx cy cz l w h`
std::vector<Detection> parse_detections(std::string_view text, const std::string& where = "detections");
std::vector<Detection> read_detections(const fs::path& path);
std::string format_detections(std::span<const Detection> dets);

std::string format_report_text(const EvalReport& report);
std::string format_report_kv(const EvalReport& report);

}  // namespace mdt3d

namespace mdt3d {

/// Oracle detector: every ground-truth box re-emitted with confidence 1.
std::vector<Detection> echo_ground_truth(std::span<const GroundTruth> gts);

}  // namespace mdt3d
