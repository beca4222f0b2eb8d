#include "mdt3d/pipeline.hpp"

#include <cstdio>
#include <set>

#include "mdt3d/error.hpp"
#include "mdt3d/harmonize.hpp"
#include "mdt3d/parallel.hpp"

namespace mdt3d {

StagedOutput::StagedOutput(fs::path final_dir, bool force) : final_(std::move(final_dir)) {
  if (final_.empty()) throw ConfigError("output directory not set");
  if (fs::exists(final_) && !force) {
    throw ConfigError("output '" + final_.string() + "' already exists (pass --force to overwrite)");
  }
  staging_ = final_;
  staging_ += ".partial";
  std::error_code ec;
  fs::remove_all(staging_, ec);
  fs::create_directories(staging_, ec);
  if (ec) throw IoError("cannot create '" + staging_.string() + "': " + ec.message());
}

StagedOutput::~StagedOutput() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void StagedOutput::commit() {
  std::error_code ec;
  fs::remove_all(final_, ec);
  fs::rename(staging_, final_, ec);
  if (ec) throw IoError("cannot move output into '" + final_.string() + "': " + ec.message());
  committed_ = true;
}

ClassStats class_stats_from(const DatasetStatsReport& report) {
  ClassStats cs;
  cs.dataset_id = report.dataset_id;
  for (const auto& [label, summary] : report.classes) cs.mean_per_scan[require_coarse_label(label)] = summary.per_scan;
  return cs;
}

std::string format_inject_report_kv(const InjectReport& report) {
  std::string out;
  for (CoarseLabel c : kAllCoarseLabels) {
    const std::string k(to_string(c));
    const auto i = index_of(c);
    out += "requested." + k + "=" + std::to_string(report.requested[i]) + "\n";
    out += "injected." + k + "=" + std::to_string(report.injected[i]) + "\n";
    out += "shortfall." + k + "=" + std::to_string(report.shortfall[i]) + "\n";
  }
  return out;
}

AugmentEpochResult augment_epoch(const EpochPlan& plan, std::span<const DatasetManifest> training,
                                 std::span<const InstanceBank> banks, std::span<const ClassStats> stats,
                                 const AugmentConfig& config, const fs::path& out_dir, std::size_t workers) {
  std::map<std::string, std::pair<const DatasetManifest*, std::map<std::string, std::size_t>>> lookup;
  for (const auto& m : training) {
    auto& slot = lookup[m.dataset_id];
    slot.first = &m;
    for (std::size_t i = 0; i < m.size(); ++i) slot.second.emplace(m.scans[i].scan_id, i);
  }
  std::vector<std::pair<const DatasetManifest*, std::size_t>> sources;
  sources.reserve(plan.entries.size());
  for (const auto& e : plan.entries) {
    const auto it = lookup.find(e.dataset_id);
    if (it == lookup.end()) throw ConfigError("plan references unknown dataset '" + e.dataset_id + "'");
    const auto sit = it->second.second.find(e.scan_id);
    if (sit == it->second.second.end()) {
      throw ConfigError("plan references unknown scan '" + e.scan_id + "' of dataset '" + e.dataset_id + "'");
    }
    sources.emplace_back(it->second.first, sit->second);
  }

  fs::create_directories(out_dir);
  AugmentEpochResult result;
  result.manifest.dataset_id = "epoch_" + std::to_string(plan.epoch);
  result.manifest.descriptor = "descriptor.json";
  result.manifest.harmonized = true;
  result.manifest.base_dir = out_dir;
  result.manifest.scans.resize(plan.entries.size());

  std::vector<InjectReport> reports(plan.entries.size());
  parallel_for(plan.entries.size(), workers, [&](std::size_t k) {
    const auto [man, idx] = sources[k];
    const Scan scan = load_scan(*man, idx);
    Rng rng = make_stream(plan.seed, plan.epoch, k);
    const InjectResult res = augment_training_scan(scan, banks, stats, config, rng);
    char name[32];
    std::snprintf(name, sizeof name, "%06zu", k);
    ScanEntry entry{name, std::string(name) + ".pts", std::string(name) + ".lbl"};
    save_scan(res.scan, out_dir / entry.points, out_dir / entry.labels);
    result.manifest.scans[k] = std::move(entry);
    reports[k] = res.report;
  });
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < kAllCoarseLabels.size(); ++i) {
      result.report.requested[i] += r.requested[i];
      result.report.injected[i] += r.injected[i];
      result.report.shortfall[i] += r.shortfall[i];
    }
  }

  DatasetDescriptor desc;
  desc.dataset_id = result.manifest.dataset_id;
  for (CoarseLabel c : kAllCoarseLabels) desc.label_map.emplace(std::string(to_string(c)), c);
  write_descriptor(desc, out_dir / result.manifest.descriptor);
  write_manifest(result.manifest, out_dir / "manifest.json");
  std::string sources_txt;
  for (std::size_t k = 0; k < plan.entries.size(); ++k) {
    sources_txt += result.manifest.scans[k].scan_id + ' ' + plan.entries[k].dataset_id + ' ' + plan.entries[k].scan_id + '\n';
  }
  write_file(out_dir / "sources.txt", sources_txt);
  write_file(out_dir / "inject_report.kv", format_inject_report_kv(result.report));
  return result;
}

DatasetManifest rebase_manifest(const DatasetManifest& source, const fs::path& new_base) {
  DatasetManifest out = source;
  const fs::path base = fs::weakly_canonical(fs::absolute(new_base));
  auto rel = [&](const fs::path& p) {
    return fs::weakly_canonical(fs::absolute(source.resolve(p))).lexically_relative(base);
  };
  out.descriptor = rel(source.descriptor);
  for (auto& e : out.scans) {
    e.points = rel(e.points);
    e.labels = rel(e.labels);
  }
  out.base_dir = new_base;
  return out;
}

void validate_pipeline_config(const PipelineConfig& config) {
  if (config.training.empty()) throw ConfigError("pipeline needs at least one training manifest");
  if (config.target.empty()) throw ConfigError("pipeline needs a target manifest");
  if (config.epochs == 0) throw ConfigError("pipeline needs epochs >= 1");
  if (!(config.eval_fraction > 0.0 && config.eval_fraction <= 1.0)) {
    throw ConfigError("eval fraction must be in (0, 1]");
  }
  std::string target_id = config.target_dataset_id;
  if (target_id.empty()) target_id = read_manifest(config.target).dataset_id;
  std::set<std::string> ids;
  for (const auto& p : config.training) {
    const auto id = read_manifest(p).dataset_id;
    if (id == target_id) {
      throw ConfigError("leave-one-out violated: target dataset '" + target_id + "' is also a training dataset");
    }
    if (!ids.insert(id).second) throw ConfigError("training dataset '" + id + "' listed twice");
  }
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  validate_pipeline_config(config);
  const AugmentConfig aug = config.augment_config ? read_augment_config(*config.augment_config) : AugmentConfig{};
  const EvalConfig ev = config.eval_config ? read_eval_config(*config.eval_config) : EvalConfig{};
  const std::size_t w = config.workers;

  StagedOutput staged(config.output, config.force);
  const fs::path root = staged.path();
  PipelineResult result;

  auto harmonize_one = [&](const fs::path& manifest_path) {
    const auto raw = read_manifest(manifest_path);
    const auto desc = read_descriptor(raw.descriptor_path());
    return harmonize_dataset(raw, desc, root / "harmonized" / raw.dataset_id, w).manifest;
  };
  for (const auto& p : config.training) result.harmonized_training.push_back(harmonize_one(p));
  result.harmonized_target = harmonize_one(config.target);

  std::vector<ClassStats> stats;
  std::vector<InstanceBank> banks;
  fs::create_directories(root / "stats");
  for (const auto& m : result.harmonized_training) {
    const auto report = compute_stats(m, w);
    write_file(root / "stats" / (m.dataset_id + ".kv"), format_stats_kv(report));
    write_file(root / "stats" / (m.dataset_id + ".txt"), format_stats_text(report));
    stats.push_back(class_stats_from(report));
    auto built = build_bank(m, config.min_points, w);
    write_bank(built.bank, root / "banks");
    banks.push_back(std::move(built.bank));
  }

  fs::create_directories(root / "epochs");
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto plan = plan_epoch(result.harmonized_training, e, config.seed, config.per_dataset);
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03zu", e);
    write_file(root / "epochs" / (std::string(name) + ".plan"), format_plan(plan));
    result.epochs.push_back(augment_epoch(plan, result.harmonized_training, banks, stats, aug, root / "epochs" / name, w));
    result.plans.push_back(plan);
  }

  const fs::path eval_dir = root / "eval";
  fs::create_directories(eval_dir);
  auto subset = subsample_eval(result.harmonized_target, config.eval_fraction, config.seed);
  result.eval_manifest = rebase_manifest(subset, eval_dir);
  write_manifest(result.eval_manifest, eval_dir / "manifest.json");
  if (config.detections) {
    const auto dets = read_detections(*config.detections);
    result.report = evaluate(dets, result.eval_manifest, ev, w);
    write_file(eval_dir / "report.txt", format_report_text(*result.report));
    write_file(eval_dir / "report.kv", format_report_kv(*result.report));
  }
  write_file(root / "seeds.txt", "seed=" + std::to_string(config.seed) + "\nepochs=" + std::to_string(config.epochs) +
                                     "\neval_fraction=" + format_double(config.eval_fraction) + "\n");

  staged.commit();
  auto move_base = [&](DatasetManifest& m) {
    m.base_dir = config.output / fs::path(m.base_dir).lexically_relative(root);
  };
  for (auto& m : result.harmonized_training) move_base(m);
  move_base(result.harmonized_target);
  move_base(result.eval_manifest);
  for (auto& ep : result.epochs) move_base(ep.manifest);
  return result;
}

}  // namespace mdt3d
