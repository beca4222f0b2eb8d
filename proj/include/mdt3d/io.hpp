#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mdt3d/geometry.hpp"
#include "mdt3d/labels.hpp"

namespace mdt3d {

namespace fs = std::filesystem;

/// One LiDAR sweep with its annotations. No intensity channel.
struct Scan {
  std::vector<Point3> points;
  std::vector<Box3D> boxes;
  std::string dataset_id;
  std::string scan_id;
  friend bool operator==(const Scan&, const Scan&) = default;
};

/// Label-map target telling harmonization to split the class by box volume.
struct VehicleByVolume {
  friend bool operator==(VehicleByVolume, VehicleByVolume) = default;
};

using LabelTarget = std::variant<CoarseLabel, VehicleByVolume>;

/// Conversion from KITTI camera coordinates (x right, y down, z forward,
/// bottom-center boxes) into the canonical frame. Canonical axis k takes
/// `sign[k] * camera[axis[k]] + translation[k]`.
struct KittiConvention {
  std::array<int, 3> axis{2, 0, 1};
  std::array<double, 3> sign{1.0, -1.0, -1.0};
  std::array<double, 3> translation{0.0, 0.0, 0.0};
  bool bottom_center = true;
  double yaw_sign = -1.0;
  double yaw_offset = -kPi / 2.0;
  friend bool operator==(const KittiConvention&, const KittiConvention&) = default;
};

/// Per-dataset harmonization config.
struct DatasetDescriptor {
  std::string dataset_id;
  std::map<std::string, LabelTarget> label_map;
  double z_offset = 0.0;
  /// Full horizontal annotation angle in radians, for front-view-only datasets.
  std::optional<double> annotation_fov;
  /// Cluster count for VEHICLE_BY_VOLUME classes.
  int volume_clusters = 3;
  std::optional<KittiConvention> kitti;
  /// Mean instances per scan keyed by label, filled in by `stats`.
  std::map<std::string, double> class_stats;
  friend bool operator==(const DatasetDescriptor&, const DatasetDescriptor&) = default;
};

struct ScanEntry {
  std::string scan_id;
  fs::path points;
  fs::path labels;
  friend bool operator==(const ScanEntry&, const ScanEntry&) = default;
};

/// Index of a dataset on disk. Paths are stored as written and resolved
/// against `base_dir` (the manifest's directory). Opening a manifest never
/// touches point data.
struct DatasetManifest {
  std::string dataset_id;
  fs::path descriptor;
  bool harmonized = false;
  std::vector<ScanEntry> scans;
  fs::path base_dir;

  std::size_t size() const { return scans.size(); }
  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
  fs::path descriptor_path() const { return resolve(descriptor); }
};

inline constexpr std::size_t kPointRecordBytes = 12;

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Strict parse of a full token; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view token);

std::vector<Point3> read_points(const fs::path& path);
void write_points(const fs::path& path, std::span<const Point3> points);

/// `class yaw cx cy cz l w h`
std::string format_box_line(const Box3D& box);
/// Parses one label line; `where` prefixes error messages (e.g. "file:12").
Box3D parse_box_line(std::string_view line, const std::string& where);

std::vector<Box3D> read_labels(const fs::path& path);
void write_labels(const fs::path& path, std::span<const Box3D> boxes);

Scan load_scan(const fs::path& points_path, const fs::path& labels_path, std::string dataset_id,
               std::string scan_id = {});
Scan load_scan(const DatasetManifest& manifest, std::size_t index);
/// Boxes only; used where point data is not needed.
std::vector<Box3D> load_scan_labels(const DatasetManifest& manifest, std::size_t index);
void save_scan(const Scan& scan, const fs::path& points_path, const fs::path& labels_path);

DatasetManifest read_manifest(const fs::path& path);
void write_manifest(const DatasetManifest& manifest, const fs::path& path);
/// Throws DataError if empty or scan ids repeat.
void validate_manifest(const DatasetManifest& manifest);

DatasetDescriptor read_descriptor(const fs::path& path);
void write_descriptor(const DatasetDescriptor& descriptor, const fs::path& path);
std::string label_target_name(const LabelTarget& target);

struct KittiObject {
  std::string raw_class;
  Box3D box;
};

/// Parses one KITTI object line (15 fields, optional trailing score). Returns
/// nullopt for DontCare entries. `line_no` is used in error messages.
std::optional<KittiObject> parse_kitti_label_line(std::string_view line, const KittiConvention& conv,
                                                  std::size_t line_no = 0);

/// Reads a KITTI velodyne file (x, y, z, intensity float32 records) and
/// drops the intensity channel.
std::vector<Point3> read_kitti_points(const fs::path& path);

/// Whole file as bytes; used for determinism checks and golden tests.
std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view contents);

}  // namespace mdt3d
