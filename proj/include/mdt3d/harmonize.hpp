#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mdt3d/io.hpp"
#include "mdt3d/labels.hpp"

namespace mdt3d {

/// 1-D k-means result over box volumes (m^3). Centers are strictly
/// increasing; center i maps to kVehicleLabels[i].
struct VolumeClustering {
  std::vector<double> centers;
  std::size_t iterations = 0;

  std::size_t k() const { return centers.size(); }
  /// Index of the nearest center; ties go to the smaller center.
  std::size_t assign(double volume) const;
  CoarseLabel label_for(double volume) const;
};

/// Lloyd's algorithm on scalar volumes, started from the exact optimal
/// contiguous partition of the sorted input (dynamic programming); iterates
/// until the largest center shift is below 1e-9 or 100 iterations. An empty
/// cluster takes the member of the largest cluster farthest from its center.
/// Throws DataError on empty input, non-positive volumes, or k greater than
/// the number of distinct volumes.
VolumeClustering fit_volume_clusters(std::span<const double> volumes, std::size_t k);

/// Sum over volumes of squared distance to the nearest center.
double within_cluster_ss(std::span<const double> volumes, std::span<const double> centers);

/// Shifts every point and box by the descriptor's z offset.
Scan to_canonical(const Scan& scan, const DatasetDescriptor& descriptor);
Scan shift_z(const Scan& scan, double dz);

/// Horizontal wedge test; boundary inclusive. For fov >= 2pi every point passes.
bool in_front_view(double x, double y, double fov);
/// Keeps points and box centers inside the wedge.
Scan crop_front_view(const Scan& scan, double fov);

/// Throws DataError if `raw` has no label-map entry, or ConfigError if it maps
/// to VEHICLE_BY_VOLUME and no clustering is supplied.
CoarseLabel map_label(const std::string& raw, const Box3D& box, const DatasetDescriptor& descriptor,
                      const VolumeClustering* clustering);

struct HarmonizeResult {
  DatasetManifest manifest;
  DatasetDescriptor descriptor;
  std::optional<VolumeClustering> clustering;
  std::size_t boxes_in = 0;
  std::size_t boxes_out = 0;
  std::size_t points_in = 0;
  std::size_t points_out = 0;
};

/// Two passes: labels of every scan are checked and VEHICLE_BY_VOLUME volumes
/// collected (nothing is written if a class is unmapped), then each scan is
/// shifted, cropped when the descriptor has an annotation FOV, relabeled and
/// written to `out_dir` along with `manifest.json` and `descriptor.json`.
HarmonizeResult harmonize_dataset(const DatasetManifest& manifest, const DatasetDescriptor& descriptor,
                                  const fs::path& out_dir, std::size_t workers = 1);

}  // namespace mdt3d
