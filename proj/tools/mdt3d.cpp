// mdt3d: multi-dataset LiDAR harmonization, sampling, injection and evaluation.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mdt3d/augment.hpp"
#include "mdt3d/bank.hpp"
#include "mdt3d/error.hpp"
#include "mdt3d/eval.hpp"
#include "mdt3d/harmonize.hpp"
#include "mdt3d/io.hpp"
#include "mdt3d/pipeline.hpp"
#include "mdt3d/sampler.hpp"
#include "mdt3d/stats.hpp"
#include "mdt3d/synth.hpp"

namespace fs = std::filesystem;
using namespace mdt3d;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kIo = 3 };

struct Common {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool force = false;
};

void announce(const std::string& cmd, const Common& c) {
  std::cerr << "mdt3d " << cmd << ": seed=" << c.seed << " workers=" << c.workers << "\n";
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Base random seed")->capture_default_str();
  sub->add_option("--workers", c.workers, "Worker threads")->envname("MDT3D_WORKERS")->check(CLI::Range(1, 1024));
  sub->add_flag("--force", c.force, "Replace existing output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-dataset 3D detection data pipeline"};
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags win");
  app.require_subcommand(1);
  Common common;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  fs::path synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "Synthetic dataset spec (JSON)")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  add_common(synth, common);

  // harmonize
  auto* harm = app.add_subcommand("harmonize", "Canonical frame + coarse labels");
  fs::path harm_manifest, harm_descriptor, harm_out;
  harm->add_option("--manifest", harm_manifest, "Raw dataset manifest")->required();
  harm->add_option("--descriptor", harm_descriptor, "Descriptor (defaults to the manifest's)");
  harm->add_option("--out", harm_out, "Output directory")->required();
  add_common(harm, common);

  // stats
  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  fs::path stats_manifest, stats_out;
  std::vector<std::string> hist_labels;
  double bin_width = 10.0;
  bool update_descriptor = false;
  stats->add_option("--manifest", stats_manifest, "Dataset manifest")->required();
  stats->add_option("--out", stats_out, "Output directory")->required();
  stats->add_option("--histogram", hist_labels, "Emit a volume histogram CSV for these labels");
  stats->add_option("--bin-width", bin_width, "Histogram bin width (m^3)")->capture_default_str();
  stats->add_flag("--update-descriptor", update_descriptor, "Cache per-scan means in the dataset descriptor");
  add_common(stats, common);

  // bank
  auto* bank = app.add_subcommand("bank", "Build an instance bank");
  fs::path bank_manifest, bank_out;
  std::size_t min_points = kDefaultMinPoints;
  bank->add_option("--manifest", bank_manifest, "Harmonized manifest")->required();
  bank->add_option("--out", bank_out, "Output directory")->required();
  bank->add_option("--min-points", min_points, "Minimum points per instance")->capture_default_str();
  add_common(bank, common);

  // epoch
  auto* epoch = app.add_subcommand("epoch", "Plan balanced training epochs");
  std::vector<fs::path> epoch_manifests;
  fs::path epoch_out;
  std::size_t first_epoch = 0, epochs = 1;
  std::optional<std::size_t> per_dataset;
  epoch->add_option("--manifest", epoch_manifests, "Training manifests")->required();
  epoch->add_option("--out", epoch_out, "Output directory for epoch_<e>.plan files")->required();
  epoch->add_option("--epoch", first_epoch, "First epoch index")->capture_default_str();
  epoch->add_option("--epochs", epochs, "Number of epochs")->capture_default_str()->check(CLI::PositiveNumber);
  epoch->add_option("--per-dataset", per_dataset, "Scans per dataset (default: smallest dataset size)");
  add_common(epoch, common);

  // augment
  auto* augment = app.add_subcommand("augment", "Materialize augmented scans for an epoch plan");
  fs::path plan_path, augment_out, augment_config;
  std::vector<fs::path> augment_manifests, bank_paths, stats_paths;
  augment->add_option("--plan", plan_path, "Epoch plan file")->required();
  augment->add_option("--manifest", augment_manifests, "Harmonized training manifests")->required();
  augment->add_option("--bank", bank_paths, "Bank index files, in injection-source order")->required();
  augment->add_option("--stats", stats_paths, "Stats key=value files of the training datasets")->required();
  augment->add_option("--policy", augment_config, "Augmentation policy (JSON)");
  augment->add_option("--out", augment_out, "Output directory")->required();
  add_common(augment, common);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate detections (AP@R40, mAP)");
  fs::path eval_manifest, dets_path, eval_config, eval_out;
  double fraction = 1.0;
  eval->add_option("--manifest", eval_manifest, "Harmonized ground-truth manifest")->required();
  eval->add_option("--detections", dets_path, "Detections file")->required();
  eval->add_option("--eval-config", eval_config, "Eval config (JSON)");
  eval->add_option("--fraction", fraction, "Evaluate on a fixed subsample of this fraction")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  eval->add_option("--out", eval_out, "Output directory")->required();
  add_common(eval, common);

  // subsample
  auto* subsample = app.add_subcommand("subsample", "Write a fixed evaluation subsample manifest");
  fs::path sub_manifest, sub_out;
  double sub_fraction = 0.2;
  subsample->add_option("--manifest", sub_manifest, "Source manifest")->required();
  subsample->add_option("--fraction", sub_fraction, "Fraction of scans")->capture_default_str();
  subsample->add_option("--out", sub_out, "Output directory")->required();
  add_common(subsample, common);

  // echo-gt
  auto* echo = app.add_subcommand("echo-gt", "Write ground truth as confidence-1 detections");
  fs::path echo_manifest, echo_out;
  echo->add_option("--manifest", echo_manifest, "Harmonized manifest")->required();
  echo->add_option("--out", echo_out, "Detections file")->required();
  add_common(echo, common);

  // import-kitti
  auto* kitti = app.add_subcommand("import-kitti", "Convert KITTI label_2 (+ velodyne) into canonical files");
  fs::path kitti_labels, kitti_velo, kitti_descriptor, kitti_out;
  kitti->add_option("--labels", kitti_labels, "Directory of KITTI label .txt files")->required();
  kitti->add_option("--velodyne", kitti_velo, "Directory of KITTI velodyne .bin files");
  kitti->add_option("--descriptor", kitti_descriptor, "Descriptor with kitti_convention")->required();
  kitti->add_option("--out", kitti_out, "Output directory")->required();
  add_common(kitti, common);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run the leave-one-out pipeline end to end");
  PipelineConfig pc;
  std::string augment_cfg_s, eval_cfg_s, dets_s;
  std::optional<std::size_t> pipe_per_dataset;
  pipe->add_option("--train", pc.training, "Raw training manifests")->required();
  pipe->add_option("--target", pc.target, "Raw target manifest")->required();
  pipe->add_option("--target-id", pc.target_dataset_id, "Target dataset id (default: from the manifest)");
  pipe->add_option("--policy", augment_cfg_s, "Augmentation policy (JSON)");
  pipe->add_option("--eval-config", eval_cfg_s, "Eval config (JSON)");
  pipe->add_option("--detections", dets_s, "Detections on the target to evaluate");
  pipe->add_option("--epochs", pc.epochs, "Training epochs to materialize")->capture_default_str()->check(CLI::PositiveNumber);
  pipe->add_option("--fraction", pc.eval_fraction, "Eval subsample fraction")->capture_default_str();
  pipe->add_option("--min-points", pc.min_points, "Bank minimum points")->capture_default_str();
  pipe->add_option("--per-dataset", pipe_per_dataset, "Scans per dataset per epoch");
  pipe->add_option("--out", pc.output, "Output directory")->required();
  add_common(pipe, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*synth) {
      announce("synth", common);
      StagedOutput out(synth_out, common.force);
      const auto spec = read_synthetic_spec(synth_spec);
      const auto m = generate_synthetic_dataset(spec, common.seed, out.path());
      out.commit();
      std::cout << "wrote " << m.size() << " scans of '" << m.dataset_id << "' to " << synth_out.string() << "\n";
    } else if (*harm) {
      announce("harmonize", common);
      const auto manifest = read_manifest(harm_manifest);
      const auto desc = read_descriptor(harm_descriptor.empty() ? manifest.descriptor_path() : harm_descriptor);
      StagedOutput out(harm_out, common.force);
      const auto res = harmonize_dataset(manifest, desc, out.path(), common.workers);
      std::string report = "dataset_id=" + manifest.dataset_id + "\nboxes_in=" + std::to_string(res.boxes_in) +
                           "\nboxes_out=" + std::to_string(res.boxes_out) + "\npoints_in=" +
                           std::to_string(res.points_in) + "\npoints_out=" + std::to_string(res.points_out) + "\n";
      if (res.clustering) {
        for (std::size_t i = 0; i < res.clustering->k(); ++i) {
          report += "cluster." + std::string(to_string(kVehicleLabels[i])) + ".center=" +
                    format_double(res.clustering->centers[i]) + "\n";
        }
      }
      write_file(out.path() / "harmonize_report.kv", report);
      out.commit();
      std::cout << report;
    } else if (*stats) {
      announce("stats", common);
      const auto manifest = read_manifest(stats_manifest);
      StagedOutput out(stats_out, common.force);
      const auto report = compute_stats(manifest, common.workers);
      write_file(out.path() / (manifest.dataset_id + ".kv"), format_stats_kv(report));
      write_file(out.path() / (manifest.dataset_id + ".txt"), format_stats_text(report));
      for (const auto& label : hist_labels) {
        const auto h = volume_histogram(manifest, label, bin_width, common.workers);
        write_file(out.path() / (manifest.dataset_id + "." + label + ".hist.csv"), format_histogram_csv(h));
      }
      out.commit();
      if (update_descriptor) {
        auto desc = read_descriptor(manifest.descriptor_path());
        desc.class_stats.clear();
        for (const auto& [label, c] : report.classes) desc.class_stats[label] = c.per_scan;
        write_descriptor(desc, manifest.descriptor_path());
      }
      std::cout << format_stats_text(report);
    } else if (*bank) {
      announce("bank", common);
      const auto manifest = read_manifest(bank_manifest);
      if (!manifest.harmonized) throw ConfigError("bank needs a harmonized manifest");
      StagedOutput out(bank_out, common.force);
      const auto built = build_bank(manifest, min_points, common.workers);
      write_bank(built.bank, out.path());
      out.commit();
      std::cout << "records=" << built.bank.total() << " skipped=" << built.skipped << "\n";
    } else if (*epoch) {
      announce("epoch", common);
      std::vector<DatasetManifest> manifests;
      for (const auto& p : epoch_manifests) manifests.push_back(read_manifest(p));
      StagedOutput out(epoch_out, common.force);
      for (std::size_t e = first_epoch; e < first_epoch + epochs; ++e) {
        const auto plan = plan_epoch(manifests, e, common.seed, per_dataset);
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03zu.plan", e);
        write_file(out.path() / name, format_plan(plan));
        std::cout << name << ": " << plan.entries.size() << " entries, " << plan.per_dataset << " per dataset\n";
      }
      out.commit();
    } else if (*augment) {
      announce("augment", common);
      const auto plan = parse_plan(read_file(plan_path));
      std::vector<DatasetManifest> manifests;
      for (const auto& p : augment_manifests) manifests.push_back(read_manifest(p));
      std::vector<InstanceBank> banks;
      for (const auto& p : bank_paths) banks.push_back(read_bank(p));
      std::vector<ClassStats> cs;
      for (const auto& p : stats_paths) cs.push_back(class_stats_from(parse_stats_kv(read_file(p))));
      const AugmentConfig cfg = augment_config.empty() ? AugmentConfig{} : read_augment_config(augment_config);
      StagedOutput out(augment_out, common.force);
      const auto res = augment_epoch(plan, manifests, banks, cs, cfg, out.path(), common.workers);
      out.commit();
      std::cout << "scans=" << res.manifest.size() << " injected=" << res.report.total_injected()
                << " shortfall=" << res.report.total_shortfall() << "\n";
    } else if (*eval) {
      announce("eval", common);
      const EvalConfig cfg = eval_config.empty() ? EvalConfig{} : read_eval_config(eval_config);
      auto manifest = read_manifest(eval_manifest);
      if (fraction < 1.0) manifest = subsample_eval(manifest, fraction, common.seed);
      const auto dets = read_detections(dets_path);
      StagedOutput out(eval_out, common.force);
      const auto report = evaluate(dets, manifest, cfg, common.workers);
      write_file(out.path() / "report.txt", format_report_text(report));
      write_file(out.path() / "report.kv", format_report_kv(report));
      out.commit();
      std::cout << format_report_text(report);
    } else if (*subsample) {
      announce("subsample", common);
      const auto manifest = read_manifest(sub_manifest);
      StagedOutput out(sub_out, common.force);
      const auto sub = rebase_manifest(subsample_eval(manifest, sub_fraction, common.seed), out.final_path());
      write_manifest(sub, out.path() / "manifest.json");
      out.commit();
      std::cout << "scans=" << sub.size() << "\n";
    } else if (*echo) {
      announce("echo-gt", common);
      const auto gts = load_ground_truth(read_manifest(echo_manifest), common.workers);
      if (fs::exists(echo_out) && !common.force) {
        throw ConfigError("output '" + echo_out.string() + "' already exists (pass --force to overwrite)");
      }
      write_file(echo_out, format_detections(echo_ground_truth(gts)));
    } else if (*kitti) {
      announce("import-kitti", common);
      const auto desc = read_descriptor(kitti_descriptor);
      if (!desc.kitti) throw ConfigError(kitti_descriptor.string() + ": no kitti_convention");
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(kitti_labels)) {
        if (e.path().extension() == ".txt") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw ConfigError(kitti_labels.string() + ": no label files");
      StagedOutput out(kitti_out, common.force);
      DatasetManifest m;
      m.dataset_id = desc.dataset_id;
      m.descriptor = "descriptor.json";
      for (const auto& f : files) {
        Scan s;
        s.dataset_id = desc.dataset_id;
        s.scan_id = f.stem().string();
        const std::string text = read_file(f);
        std::size_t pos = 0, line_no = 0;
        while (pos < text.size()) {
          std::size_t nl = text.find('\n', pos);
          if (nl == std::string::npos) nl = text.size();
          ++line_no;
          const std::string_view line(text.data() + pos, nl - pos);
          pos = nl + 1;
          if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
          try {
            if (auto obj = parse_kitti_label_line(line, *desc.kitti, line_no)) s.boxes.push_back(obj->box);
          } catch (const DataError& e) {
            throw DataError(f.string() + ": " + e.what());
          }
        }
        if (!kitti_velo.empty()) s.points = read_kitti_points(kitti_velo / (s.scan_id + ".bin"));
        ScanEntry entry{s.scan_id, s.scan_id + ".pts", s.scan_id + ".lbl"};
        save_scan(s, out.path() / entry.points, out.path() / entry.labels);
        m.scans.push_back(std::move(entry));
      }
      write_descriptor(desc, out.path() / m.descriptor);
      write_manifest(m, out.path() / "manifest.json");
      out.commit();
      std::cout << "imported " << m.size() << " scans\n";
    } else if (*pipe) {
      announce("pipeline", common);
      pc.seed = common.seed;
      pc.workers = common.workers;
      pc.force = common.force;
      pc.per_dataset = pipe_per_dataset;
      if (!augment_cfg_s.empty()) pc.augment_config = augment_cfg_s;
      if (!eval_cfg_s.empty()) pc.eval_config = eval_cfg_s;
      if (!dets_s.empty()) pc.detections = dets_s;
      const auto res = run_pipeline(pc);
      std::cout << "epochs=" << res.epochs.size() << " eval_scans=" << res.eval_manifest.size() << "\n";
      if (res.report) std::cout << format_report_text(*res.report);
    }
  } catch (const ConfigError& e) {
    std::cerr << "mdt3d: config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "mdt3d: data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "mdt3d: I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "mdt3d: I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "mdt3d: error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
