#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "mdt3d/io.hpp"

namespace mdt3d {

struct ClassSummary {
  std::size_t instances = 0;
  /// Sum over boxes of contained points; a point inside two boxes counts twice.
  std::size_t contained_points = 0;
  double sum_l = 0.0;
  double sum_w = 0.0;
  double sum_h = 0.0;
  /// Derived means, filled by compute_stats.
  Dims mean_dims;
  double mean_points = 0.0;
  double per_scan = 0.0;
  friend bool operator==(const ClassSummary&, const ClassSummary&) = default;
};

/// Classes not present in the dataset have no entry (reported as absent,
/// never as zero).
struct DatasetStatsReport {
  std::string dataset_id;
  std::size_t scans = 0;
  std::map<std::string, ClassSummary> classes;

  const ClassSummary* find(const std::string& label) const;
  friend bool operator==(const DatasetStatsReport&, const DatasetStatsReport&) = default;
};

/// Per-scan partial sums are reduced in manifest order.
DatasetStatsReport compute_stats(const DatasetManifest& manifest, std::size_t workers = 1);

struct VolumeHistogram {
  double bin_width = 1.0;
  /// Bin index k covers [k * bin_width, (k + 1) * bin_width).
  std::map<std::int64_t, std::size_t> bins;
  std::size_t total = 0;
};

VolumeHistogram volume_histogram(std::span<const Box3D> boxes, const std::string& label, double bin_width);
VolumeHistogram volume_histogram(const DatasetManifest& manifest, const std::string& label, double bin_width,
                                 std::size_t workers = 1);

std::string format_stats_text(const DatasetStatsReport& report);
/// Flat `key=value` lines; numbers use shortest round-trip formatting so that
/// parse_stats_kv reproduces every value bit for bit.
std::string format_stats_kv(const DatasetStatsReport& report);
DatasetStatsReport parse_stats_kv(std::string_view text);
std::string format_histogram_csv(const VolumeHistogram& hist);

}  // namespace mdt3d
