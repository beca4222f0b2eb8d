#include "mdt3d/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mdt3d/error.hpp"
#include "mdt3d/parallel.hpp"

namespace mdt3d {

namespace {

constexpr std::size_t kMaxIterations = 100;
constexpr double kConvergence = 1e-9;

// Assign each volume to its nearest center; returns per-cluster member lists.
std::vector<std::vector<double>> assign_all(std::span<const double> volumes, const VolumeClustering& vc) {
  std::vector<std::vector<double>> members(vc.k());
  for (double v : volumes) members[vc.assign(v)].push_back(v);
  return members;
}

void repair_empty(std::vector<std::vector<double>>& members, std::vector<double>& centers) {
  for (std::size_t e = 0; e < members.size(); ++e) {
    if (!members[e].empty()) continue;
    std::size_t largest = 0;
    for (std::size_t c = 1; c < members.size(); ++c) {
      if (members[c].size() > members[largest].size()) largest = c;
    }
    auto& donor = members[largest];
    const double center = centers[largest];
    auto far = std::max_element(donor.begin(), donor.end(),
                                [&](double a, double b) { return std::abs(a - center) < std::abs(b - center); });
    members[e].push_back(*far);
    donor.erase(far);
  }
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Exact 1-D k-means over sorted values: dp[c][j] is the least WCSS of the
// first j values in c contiguous groups. The optimal split index is monotone
// in j, so each layer is filled by divide and conquer in O(n log n).
class PartitionDp {
 public:
  explicit PartitionDp(std::span<const double> sorted) : n_(sorted.size()), sum_(n_ + 1, 0.0), sq_(n_ + 1, 0.0) {
    const double pivot = sorted[n_ / 2];
    for (std::size_t i = 0; i < n_; ++i) {
      const double d = sorted[i] - pivot;
      sum_[i + 1] = sum_[i] + d;
      sq_[i + 1] = sq_[i] + d * d;
    }
  }

  // WCSS of values [i, j).
  double cost(std::size_t i, std::size_t j) const {
    const double s = sum_[j] - sum_[i];
    return std::max(0.0, (sq_[j] - sq_[i]) - s * s / static_cast<double>(j - i));
  }

  std::vector<std::size_t> solve(std::size_t k) const {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dp(k + 1, std::vector<double>(n_ + 1, inf));
    std::vector<std::vector<std::size_t>> arg(k + 1, std::vector<std::size_t>(n_ + 1, 0));
    for (std::size_t j = 1; j <= n_; ++j) dp[1][j] = cost(0, j);
    for (std::size_t c = 2; c <= k; ++c) fill(dp[c - 1], dp[c], arg[c], c, n_, c - 1, n_ - 1);
    std::vector<std::size_t> bounds(k + 1, n_);
    for (std::size_t c = k; c >= 2; --c) bounds[c - 1] = arg[c][bounds[c]];
    bounds[0] = 0;
    return bounds;
  }

 private:
  void fill(const std::vector<double>& prev, std::vector<double>& cur, std::vector<std::size_t>& arg, std::size_t lo,
            std::size_t hi, std::size_t opt_lo, std::size_t opt_hi) const {
    if (lo > hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = opt_lo;
    for (std::size_t i = opt_lo; i <= std::min(opt_hi, mid - 1); ++i) {
      const double v = prev[i] + cost(i, mid);
      if (v < best) {
        best = v;
        best_i = i;
      }
    }
    cur[mid] = best;
    arg[mid] = best_i;
    if (mid > lo) fill(prev, cur, arg, lo, mid - 1, opt_lo, best_i);
    fill(prev, cur, arg, mid + 1, hi, best_i, opt_hi);
  }

  std::size_t n_;
  std::vector<double> sum_;
  std::vector<double> sq_;
};

std::vector<double> optimal_partition_means(std::span<const double> sorted, std::size_t k) {
  const auto bounds = PartitionDp(sorted).solve(k);
  std::vector<double> centers;
  for (std::size_t c = 0; c < k; ++c) {
    const auto first = sorted.begin() + static_cast<std::ptrdiff_t>(bounds[c]);
    const auto last = sorted.begin() + static_cast<std::ptrdiff_t>(bounds[c + 1]);
    centers.push_back(std::accumulate(first, last, 0.0) / static_cast<double>(bounds[c + 1] - bounds[c]));
  }
  return centers;
}

}  // namespace

std::size_t VolumeClustering::assign(double volume) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < centers.size(); ++i) {
    if (std::abs(volume - centers[i]) < std::abs(volume - centers[best])) best = i;
  }
  return best;
}

CoarseLabel VolumeClustering::label_for(double volume) const { return kVehicleLabels.at(assign(volume)); }

double within_cluster_ss(std::span<const double> volumes, std::span<const double> centers) {
  double ss = 0.0;
  for (double v : volumes) {
    double best = std::numeric_limits<double>::infinity();
    for (double c : centers) best = std::min(best, (v - c) * (v - c));
    ss += best;
  }
  return ss;
}

VolumeClustering fit_volume_clusters(std::span<const double> volumes, std::size_t k) {
  if (volumes.empty()) throw DataError("volume clustering needs at least one volume");
  if (k == 0) throw DataError("volume clustering needs k >= 1");
  for (double v : volumes) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DataError("volume clustering got a non-positive volume");
  }
  std::vector<double> sorted(volumes.begin(), volumes.end());
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = static_cast<std::size_t>(std::distance(sorted.begin(), std::unique(sorted.begin(), sorted.end())));
  sorted.assign(volumes.begin(), volumes.end());
  std::sort(sorted.begin(), sorted.end());
  if (k > distinct) {
    throw DataError("volume clustering: k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) +
                    " distinct volumes");
  }

  VolumeClustering vc;
  vc.centers = optimal_partition_means(sorted, k);

  for (vc.iterations = 1; vc.iterations <= kMaxIterations; ++vc.iterations) {
    auto members = assign_all(sorted, vc);
    repair_empty(members, vc.centers);
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double m = mean_of(members[c]);
      shift = std::max(shift, std::abs(m - vc.centers[c]));
      vc.centers[c] = m;
    }
    std::sort(vc.centers.begin(), vc.centers.end());
    if (shift < kConvergence) break;
  }
  vc.iterations = std::min(vc.iterations, kMaxIterations);

  // Final pass makes each center exactly the mean of its nearest-assigned set.
  auto members = assign_all(sorted, vc);
  for (std::size_t c = 0; c < k; ++c) {
    if (!members[c].empty()) vc.centers[c] = mean_of(members[c]);
  }
  std::sort(vc.centers.begin(), vc.centers.end());
  for (std::size_t c = 1; c < k; ++c) {
    if (!(vc.centers[c] > vc.centers[c - 1])) throw DataError("volume clustering collapsed two clusters");
  }
  return vc;
}

Scan shift_z(const Scan& scan, double dz) {
  Scan out = scan;
  for (auto& p : out.points) p.z += dz;
  for (auto& b : out.boxes) b.center.z += dz;
  return out;
}

Scan to_canonical(const Scan& scan, const DatasetDescriptor& descriptor) {
  if (descriptor.z_offset == 0.0) return scan;
  return shift_z(scan, descriptor.z_offset);
}

bool in_front_view(double x, double y, double fov) {
  if (fov >= kTwoPi) return true;
  if (fov <= kPi && !(x > 0.0)) return false;
  return std::abs(std::atan2(y, x)) <= fov / 2.0;
}

Scan crop_front_view(const Scan& scan, double fov) {
  Scan out;
  out.dataset_id = scan.dataset_id;
  out.scan_id = scan.scan_id;
  std::copy_if(scan.points.begin(), scan.points.end(), std::back_inserter(out.points),
               [&](const Point3& p) { return in_front_view(p.x, p.y, fov); });
  std::copy_if(scan.boxes.begin(), scan.boxes.end(), std::back_inserter(out.boxes),
               [&](const Box3D& b) { return in_front_view(b.center.x, b.center.y, fov); });
  return out;
}

CoarseLabel map_label(const std::string& raw, const Box3D& box, const DatasetDescriptor& descriptor,
                      const VolumeClustering* clustering) {
  const auto it = descriptor.label_map.find(raw);
  if (it == descriptor.label_map.end()) {
    throw DataError("unmapped class '" + raw + "' in dataset '" + descriptor.dataset_id + "'");
  }
  if (const auto* direct = std::get_if<CoarseLabel>(&it->second)) return *direct;
  if (clustering == nullptr) {
    throw ConfigError("class '" + raw + "' in dataset '" + descriptor.dataset_id +
                      "' is split by volume but no clustering was fitted");
  }
  return clustering->label_for(box.volume());
}

HarmonizeResult harmonize_dataset(const DatasetManifest& manifest, const DatasetDescriptor& descriptor,
                                  const fs::path& out_dir, std::size_t workers) {
  validate_manifest(manifest);
  if (manifest.dataset_id != descriptor.dataset_id) {
    throw ConfigError("manifest dataset '" + manifest.dataset_id + "' does not match descriptor dataset '" +
                      descriptor.dataset_id + "'");
  }

  // Pass 1: totality check and volume collection; labels only.
  std::vector<std::vector<Box3D>> labels(manifest.size());
  parallel_for(manifest.size(), workers, [&](std::size_t i) { labels[i] = load_scan_labels(manifest, i); });
  std::vector<double> by_volume;
  for (const auto& boxes : labels) {
    for (const auto& b : boxes) {
      const auto it = descriptor.label_map.find(b.label);
      if (it == descriptor.label_map.end()) {
        throw DataError("unmapped class '" + b.label + "' in dataset '" + descriptor.dataset_id + "'");
      }
      if (std::holds_alternative<VehicleByVolume>(it->second)) by_volume.push_back(b.volume());
    }
  }

  HarmonizeResult result;
  if (!by_volume.empty()) {
    result.clustering = fit_volume_clusters(by_volume, static_cast<std::size_t>(descriptor.volume_clusters));
  }
  const VolumeClustering* vc = result.clustering ? &*result.clustering : nullptr;

  // Pass 2: transform and write.
  fs::create_directories(out_dir);
  std::vector<std::array<std::size_t, 4>> counts(manifest.size());
  parallel_for(manifest.size(), workers, [&](std::size_t i) {
    Scan raw = load_scan(manifest, i);
    Scan s = to_canonical(raw, descriptor);
    if (descriptor.annotation_fov) s = crop_front_view(s, *descriptor.annotation_fov);
    for (auto& b : s.boxes) b.label = std::string(to_string(map_label(b.label, b, descriptor, vc)));
    const auto& e = manifest.scans[i];
    save_scan(s, out_dir / (e.scan_id + ".pts"), out_dir / (e.scan_id + ".lbl"));
    counts[i] = {raw.boxes.size(), s.boxes.size(), raw.points.size(), s.points.size()};
  });
  for (const auto& c : counts) {
    result.boxes_in += c[0];
    result.boxes_out += c[1];
    result.points_in += c[2];
    result.points_out += c[3];
  }

  result.descriptor.dataset_id = descriptor.dataset_id;
  for (CoarseLabel c : kAllCoarseLabels) result.descriptor.label_map.emplace(std::string(to_string(c)), c);
  result.descriptor.annotation_fov = descriptor.annotation_fov;
  result.descriptor.volume_clusters = descriptor.volume_clusters;

  result.manifest.dataset_id = manifest.dataset_id;
  result.manifest.descriptor = "descriptor.json";
  result.manifest.harmonized = true;
  result.manifest.base_dir = out_dir;
  for (const auto& e : manifest.scans) result.manifest.scans.push_back({e.scan_id, e.scan_id + ".pts", e.scan_id + ".lbl"});

  write_descriptor(result.descriptor, out_dir / result.manifest.descriptor);
  write_manifest(result.manifest, out_dir / "manifest.json");
  return result;
}

}  // namespace mdt3d
