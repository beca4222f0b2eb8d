#pragma once

#include <span>
#include <string>
#include <vector>

#include "mdt3d/io.hpp"
#include "mdt3d/labels.hpp"
#include "mdt3d/rng.hpp"

namespace mdt3d {

inline constexpr std::size_t kDefaultMinPoints = 5;

/// An injectable object: its points in the box frame plus the pose it was
/// cropped at. Local points are stored at float32 precision and never exceed
/// the half-extents.
struct InstanceRecord {
  CoarseLabel label = CoarseLabel::SmallVehicle;
  std::string source_dataset;
  std::string source_scan;
  Dims dims;
  std::vector<Point3> local_points;
  Point3 original_center;
  double original_yaw = 0.0;
  /// BEV distance from the ego origin to the original center.
  double original_range = 0.0;

  Box3D original_box() const;
  friend bool operator==(const InstanceRecord&, const InstanceRecord&) = default;
};

/// Localizes `world_points` (all assumed inside `box`) into a record.
InstanceRecord make_record(const Box3D& box, CoarseLabel label, std::span<const Point3> world_points,
                           std::string source_dataset, std::string source_scan);

/// Maps the record's local points into the world frame at `pose`.
std::vector<Point3> place(const InstanceRecord& record, const Box3D& pose);

struct InstanceBank {
  std::string dataset_id;
  std::size_t min_points = kDefaultMinPoints;
  PerClass<std::vector<InstanceRecord>> records;

  const std::vector<InstanceRecord>& operator[](CoarseLabel c) const { return records[index_of(c)]; }
  std::size_t total() const;
  friend bool operator==(const InstanceBank&, const InstanceBank&) = default;
};

struct BankBuild {
  InstanceBank bank;
  /// Boxes with fewer than min_points contained points.
  std::size_t skipped = 0;
};

/// Records are ordered by (manifest order, box index) within each class
/// regardless of the worker count.
BankBuild build_bank(const DatasetManifest& manifest, std::size_t min_points = kDefaultMinPoints,
                     std::size_t workers = 1);

struct DrawResult {
  std::vector<const InstanceRecord*> records;
  std::size_t shortfall = 0;
};

/// Uniform with replacement. An empty class yields no records and
/// shortfall = n.
DrawResult draw(const InstanceBank& bank, CoarseLabel label, std::size_t n, Rng& rng);

/// `<dir>/<dataset_id>.bank.idx` (text) and `<dir>/<dataset_id>.bank.pts`
/// (local points, canonical point format). Returns the index path.
fs::path write_bank(const InstanceBank& bank, const fs::path& dir);
InstanceBank read_bank(const fs::path& index_path);

}  // namespace mdt3d
