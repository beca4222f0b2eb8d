#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdt3d/io.hpp"

namespace mdt3d {

/// One size mode of a synthetic class; dims drawn from N(mean, sigma) per axis.
struct SyntheticShape {
  double weight = 1.0;
  Dims mean;
  Dims sigma;
};

struct SyntheticClass {
  std::string raw_label;
  LabelTarget target = CoarseLabel::SmallVehicle;
  /// Poisson mean of instances per scan.
  double per_scan = 0.0;
  /// Poisson mean of LiDAR returns inside each instance (beam-count proxy).
  double points_per_object = 50.0;
  std::vector<SyntheticShape> shapes;
};

/// Desk-scale stand-in for a real dataset.
struct SyntheticSpec {
  std::string dataset_id;
  std::size_t scan_count = 10;
  std::vector<SyntheticClass> classes;
  std::size_t background_points = 2000;
  /// Max BEV distance of generated points and box centers, meters.
  double range = 50.0;
  /// Boxes are annotated only inside this horizontal wedge when set.
  std::optional<double> annotation_fov;
  /// Ground height in the raw sensor frame.
  double ground_z = -1.7;
  /// Written to the descriptor; raw-to-canonical z translation.
  double z_offset = 0.0;
  int volume_clusters = 3;
};

SyntheticSpec read_synthetic_spec(const fs::path& path);

/// Writes `<scan_id>.pts`, `<scan_id>.lbl`, `descriptor.json` and
/// `manifest.json` into `out_dir` and returns the manifest. Output bytes are a
/// pure function of (spec, seed).
DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed, const fs::path& out_dir);

/// Descriptor matching a synthetic spec's label map and offsets.
DatasetDescriptor synthetic_descriptor(const SyntheticSpec& spec);

}  // namespace mdt3d
