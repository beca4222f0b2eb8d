#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mdt3d/bank.hpp"
#include "mdt3d/io.hpp"
#include "mdt3d/labels.hpp"
#include "mdt3d/rng.hpp"

namespace mdt3d {

/// Mean instances per scan for one dataset; absent classes have mean 0.
struct ClassStats {
  std::string dataset_id;
  std::map<CoarseLabel, double> mean_per_scan;

  double mean(CoarseLabel c) const;
};

/// Closed interval [lo, hi].
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  double sample(Rng& rng) const;
};

struct InjectionPolicy {
  /// Overrides of the per-class target count; unset classes use the maximum
  /// mean over the training datasets.
  std::map<CoarseLabel, double> target_counts;
  Range local_yaw{-kPi / 18.0, kPi / 18.0};
  Range xy_jitter{-0.5, 0.5};
  Range radial{-2.0, 2.0};
  Range ego_rotation{-kPi, kPi};
  Range scale{0.95, 1.05};
  /// A placement is rejected when its IoU with any existing box exceeds this.
  double collision_iou = 0.0;
  int max_attempts = 20;
  /// Max BEV distance of an injected box center from the ego origin.
  double placement_range = 70.0;

  /// Returns a copy with every range collapsed to the identity transform.
  static InjectionPolicy identity();
};

struct GlobalAugmentParams {
  Range yaw{-kPi / 4.0, kPi / 4.0};
  Range translation{-0.2, 0.2};
  double flip_x = 0.5;
  double flip_y = 0.5;

  static GlobalAugmentParams identity();
};

struct AugmentConfig {
  InjectionPolicy injection;
  GlobalAugmentParams global;
};

/// JSON config; every field optional and defaulting as above.
AugmentConfig read_augment_config(const fs::path& path);
AugmentConfig parse_augment_config(std::string_view json_text, const std::string& where = "augment config");
/// Throws ConfigError on inverted ranges, non-positive scale or bad probabilities.
void validate(const AugmentConfig& config);

/// k_hat_c: override if present, else max over stats of the class mean.
double target_count(CoarseLabel c, std::span<const ClassStats> stats, const InjectionPolicy& policy);

/// round(k_hat_c - k_bar_c^i), half away from zero, clamped at 0.
/// Throws ConfigError if `dataset_id` is not in `stats`.
long injection_quota(CoarseLabel c, const std::string& dataset_id, std::span<const ClassStats> stats,
                     const InjectionPolicy& policy);

/// Near-equal split; the first k mod n parts get one extra.
std::vector<long> split_quota(long k, std::size_t n_sources);

struct PosedInstance {
  Box3D box;
  std::vector<Point3> points;
};

/// Poses a record: scale, local yaw, radial shift along the ego ray, rotation
/// about the ego origin, then xy jitter. Draws exactly six variates from rng.
PosedInstance instance_augment(const InstanceRecord& record, Rng& rng, const InjectionPolicy& policy);

struct InjectReport {
  PerClass<long> requested{};
  PerClass<long> injected{};
  PerClass<long> shortfall{};

  long total_requested() const;
  long total_injected() const;
  long total_shortfall() const;
};

struct InjectResult {
  Scan scan;
  InjectReport report;
  /// Index in scan.boxes of the first injected box; all later boxes are injected.
  std::size_t first_injected = 0;
  /// scan.points[first_injected_point + ...] belong to injected instances.
  std::size_t first_injected_point = 0;
  /// Point count of each injected box, in box order.
  std::vector<std::size_t> injected_points;
};

/// Cross-dataset injection. For every class the scan's quota is split over
/// `banks` in order; each requested instance gets up to max_attempts
/// draw-and-pose tries, and is kept only if it lies within placement range
/// and does not collide with any box already in the scan.
InjectResult inject(const Scan& scan, std::span<const InstanceBank> banks, std::span<const ClassStats> stats,
                    const InjectionPolicy& policy, Rng& rng);

/// Scan-level rotation about z, xy translation, then Bernoulli x and y
/// mirrors, applied to points and boxes alike.
Scan global_augment(const Scan& scan, const GlobalAugmentParams& params, Rng& rng);

/// Injection followed by the scan-level transforms.
InjectResult augment_training_scan(const Scan& scan, std::span<const InstanceBank> banks,
                                   std::span<const ClassStats> stats, const AugmentConfig& config, Rng& rng);

}  // namespace mdt3d
