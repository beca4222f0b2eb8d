#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdt3d/augment.hpp"
#include "mdt3d/bank.hpp"
#include "mdt3d/eval.hpp"
#include "mdt3d/io.hpp"
#include "mdt3d/sampler.hpp"
#include "mdt3d/stats.hpp"

namespace mdt3d {

/// Writes go to `<final>.partial`; commit() renames it into place. A staged
/// directory that is never committed is removed, so failed commands leave no
/// partial output behind.
class StagedOutput {
 public:
  /// Throws ConfigError if `final_dir` exists and `force` is false; with
  /// `force` the existing directory is replaced on commit.
  StagedOutput(fs::path final_dir, bool force);
  ~StagedOutput();
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  const fs::path& path() const { return staging_; }
  const fs::path& final_path() const { return final_; }
  void commit();

 private:
  fs::path final_;
  fs::path staging_;
  bool committed_ = false;
};

/// Mean-per-scan table consumed by injection, taken bit-for-bit from a
/// stats report. Non-coarse labels are rejected.
ClassStats class_stats_from(const DatasetStatsReport& report);

struct AugmentEpochResult {
  DatasetManifest manifest;
  InjectReport report;
};

/// Materializes every plan entry as an augmented scan. Entry k uses the rng
/// stream (plan.seed, plan.epoch, k), so output is independent of `workers`.
/// Writes `<k>.pts`/`<k>.lbl`, `manifest.json`, `descriptor.json` and
/// `inject_report.kv` into out_dir.
AugmentEpochResult augment_epoch(const EpochPlan& plan, std::span<const DatasetManifest> training,
                                 std::span<const InstanceBank> banks, std::span<const ClassStats> stats,
                                 const AugmentConfig& config, const fs::path& out_dir, std::size_t workers = 1);

std::string format_inject_report_kv(const InjectReport& report);

/// Manifest whose scan paths point at `source`'s files, expressed relative
/// to `new_base`.
DatasetManifest rebase_manifest(const DatasetManifest& source, const fs::path& new_base);

struct PipelineConfig {
  std::vector<fs::path> training;
  fs::path target;
  /// Defaults to the target manifest's dataset id.
  std::string target_dataset_id;
  std::uint64_t seed = 0;
  std::optional<fs::path> augment_config;
  std::optional<fs::path> eval_config;
  std::optional<fs::path> detections;
  fs::path output;
  std::size_t epochs = 1;
  double eval_fraction = 0.2;
  std::size_t min_points = kDefaultMinPoints;
  std::optional<std::size_t> per_dataset;
  std::size_t workers = 1;
  bool force = false;
};

struct PipelineResult {
  std::vector<DatasetManifest> harmonized_training;
  DatasetManifest harmonized_target;
  DatasetManifest eval_manifest;
  std::vector<EpochPlan> plans;
  std::vector<AugmentEpochResult> epochs;
  std::optional<EvalReport> report;
};

/// Leave-one-out guard and basic sanity; throws ConfigError.
void validate_pipeline_config(const PipelineConfig& config);

/// harmonize -> stats -> bank -> epoch -> augment for the training sets, and
/// harmonize -> fixed eval subsample (-> eval, when detections are given) for
/// the target. Everything lands under `config.output` (replaced only with
/// `force`).
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace mdt3d
