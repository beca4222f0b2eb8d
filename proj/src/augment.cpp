#include "mdt3d/augment.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "mdt3d/error.hpp"

namespace mdt3d {

using nlohmann::json;

double ClassStats::mean(CoarseLabel c) const {
  const auto it = mean_per_scan.find(c);
  return it == mean_per_scan.end() ? 0.0 : it->second;
}

double Range::sample(Rng& rng) const { return std::uniform_real_distribution<double>(lo, hi)(rng); }

InjectionPolicy InjectionPolicy::identity() {
  InjectionPolicy p;
  p.local_yaw = p.xy_jitter = p.radial = p.ego_rotation = {0.0, 0.0};
  p.scale = {1.0, 1.0};
  return p;
}

GlobalAugmentParams GlobalAugmentParams::identity() {
  GlobalAugmentParams g;
  g.yaw = g.translation = {0.0, 0.0};
  g.flip_x = g.flip_y = 0.0;
  return g;
}

namespace {

Range range_from(const json& j, const char* key, Range def) {
  if (!j.contains(key)) return def;
  const auto a = j.at(key).get<std::array<double, 2>>();
  return {a[0], a[1]};
}

void check_range(const Range& r, const char* name) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi)) {
    throw ConfigError(std::string("augment config: range '") + name + "' must be finite with lo <= hi");
  }
}

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("augment config: '") + name + "' must be in [0, 1]");
}

}  // namespace

void validate(const AugmentConfig& c) {
  const auto& p = c.injection;
  check_range(p.local_yaw, "local_yaw");
  check_range(p.xy_jitter, "xy_jitter");
  check_range(p.radial, "radial");
  check_range(p.ego_rotation, "ego_rotation");
  check_range(p.scale, "scale");
  if (!(p.scale.lo > 0.0)) throw ConfigError("augment config: scale range must be positive");
  if (!(p.collision_iou >= 0.0 && p.collision_iou < 1.0)) {
    throw ConfigError("augment config: collision_iou must be in [0, 1)");
  }
  if (p.max_attempts < 1) throw ConfigError("augment config: max_attempts must be >= 1");
  if (!(p.placement_range > 0.0)) throw ConfigError("augment config: placement_range must be positive");
  for (const auto& [c, v] : p.target_counts) {
    if (!(v >= 0.0 && std::isfinite(v))) throw ConfigError("augment config: target counts must be >= 0");
  }
  check_range(c.global.yaw, "global.yaw");
  check_range(c.global.translation, "global.translation");
  check_prob(c.global.flip_x, "global.flip_x");
  check_prob(c.global.flip_y, "global.flip_y");
}

AugmentConfig parse_augment_config(std::string_view json_text, const std::string& where) {
  AugmentConfig c;
  try {
    const json j = json::parse(json_text);
    auto& p = c.injection;
    if (j.contains("target_counts")) {
      for (const auto& [name, v] : j["target_counts"].items()) {
        auto label = parse_coarse_label(name);
        if (!label) throw ConfigError(where + ": unknown class '" + name + "' in target_counts");
        p.target_counts[*label] = v.get<double>();
      }
    }
    p.local_yaw = range_from(j, "local_yaw", p.local_yaw);
    p.xy_jitter = range_from(j, "xy_jitter", p.xy_jitter);
    p.radial = range_from(j, "radial", p.radial);
    p.ego_rotation = range_from(j, "ego_rotation", p.ego_rotation);
    p.scale = range_from(j, "scale", p.scale);
    p.collision_iou = j.value("collision_iou", p.collision_iou);
    p.max_attempts = j.value("max_attempts", p.max_attempts);
    p.placement_range = j.value("placement_range", p.placement_range);
    if (j.contains("global")) {
      const json& g = j["global"];
      c.global.yaw = range_from(g, "yaw", c.global.yaw);
      c.global.translation = range_from(g, "translation", c.global.translation);
      c.global.flip_x = g.value("flip_x", c.global.flip_x);
      c.global.flip_y = g.value("flip_y", c.global.flip_y);
    }
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  validate(c);
  return c;
}

AugmentConfig read_augment_config(const fs::path& path) { return parse_augment_config(read_file(path), path.string()); }

double target_count(CoarseLabel c, std::span<const ClassStats> stats, const InjectionPolicy& policy) {
  if (const auto it = policy.target_counts.find(c); it != policy.target_counts.end()) return it->second;
  double best = 0.0;
  for (const auto& s : stats) best = std::max(best, s.mean(c));
  return best;
}

long injection_quota(CoarseLabel c, const std::string& dataset_id, std::span<const ClassStats> stats,
                     const InjectionPolicy& policy) {
  const auto it = std::find_if(stats.begin(), stats.end(), [&](const ClassStats& s) { return s.dataset_id == dataset_id; });
  if (it == stats.end()) throw ConfigError("no class statistics for dataset '" + dataset_id + "'");
  const double k = std::round(target_count(c, stats, policy) - it->mean(c));
  return std::max(0L, static_cast<long>(k));
}

std::vector<long> split_quota(long k, std::size_t n_sources) {
  if (n_sources == 0) throw ConfigError("split_quota needs at least one source");
  if (k < 0) throw ConfigError("split_quota needs k >= 0");
  const auto n = static_cast<long>(n_sources);
  std::vector<long> parts(n_sources, k / n);
  for (long i = 0; i < k % n; ++i) ++parts[static_cast<std::size_t>(i)];
  return parts;
}

PosedInstance instance_augment(const InstanceRecord& record, Rng& rng, const InjectionPolicy& policy) {
  const double s = policy.scale.sample(rng);
  const double dyaw = policy.local_yaw.sample(rng);
  const double dr = policy.radial.sample(rng);
  const double phi = policy.ego_rotation.sample(rng);
  const double dx = policy.xy_jitter.sample(rng);
  const double dy = policy.xy_jitter.sample(rng);

  Box3D box = record.original_box();
  box.dims = {record.dims.l * s, record.dims.w * s, record.dims.h * s};
  double yaw = record.original_yaw + dyaw;
  Point3 c = record.original_center;

  const double r = std::hypot(c.x, c.y);
  if (dr != 0.0 && r > 0.0) {
    const double f = std::max(0.0, r + dr) / r;
    c.x *= f;
    c.y *= f;
  }
  if (phi != 0.0) {
    const double cs = std::cos(phi), sn = std::sin(phi);
    c = {cs * c.x - sn * c.y, sn * c.x + cs * c.y, c.z};
    yaw += phi;
  }
  c.x += dx;
  c.y += dy;
  box.center = c;
  box.yaw = normalize_yaw(yaw);

  PosedInstance out;
  out.points.reserve(record.local_points.size());
  for (const auto& q : record.local_points) out.points.push_back(from_box_frame(box, {q.x * s, q.y * s, q.z * s}));
  out.box = std::move(box);
  return out;
}

long InjectReport::total_requested() const {
  long n = 0;
  for (long v : requested) n += v;
  return n;
}

long InjectReport::total_injected() const {
  long n = 0;
  for (long v : injected) n += v;
  return n;
}

long InjectReport::total_shortfall() const {
  long n = 0;
  for (long v : shortfall) n += v;
  return n;
}

InjectResult inject(const Scan& scan, std::span<const InstanceBank> banks, std::span<const ClassStats> stats,
                    const InjectionPolicy& policy, Rng& rng) {
  InjectResult res;
  res.scan = scan;
  res.first_injected = scan.boxes.size();
  res.first_injected_point = scan.points.size();
  if (banks.empty()) return res;

  for (CoarseLabel c : kAllCoarseLabels) {
    const long quota = injection_quota(c, scan.dataset_id, stats, policy);
    const std::size_t ci = index_of(c);
    res.report.requested[ci] = quota;
    if (quota == 0) continue;
    const auto parts = split_quota(quota, banks.size());
    for (std::size_t b = 0; b < banks.size(); ++b) {
      for (long want = 0; want < parts[b]; ++want) {
        bool placed = false;
        for (int attempt = 0; attempt < policy.max_attempts && !placed; ++attempt) {
          const auto drawn = draw(banks[b], c, 1, rng);
          if (drawn.records.empty()) break;
          PosedInstance inst = instance_augment(*drawn.records.front(), rng, policy);
          if (std::hypot(inst.box.center.x, inst.box.center.y) > policy.placement_range) continue;
          const bool collides = std::any_of(res.scan.boxes.begin(), res.scan.boxes.end(), [&](const Box3D& other) {
            return iou3d(inst.box, other) > policy.collision_iou;
          });
          if (collides) continue;
          res.injected_points.push_back(inst.points.size());
          res.scan.points.insert(res.scan.points.end(), inst.points.begin(), inst.points.end());
          res.scan.boxes.push_back(std::move(inst.box));
          placed = true;
        }
        if (placed) {
          ++res.report.injected[ci];
        } else {
          ++res.report.shortfall[ci];
        }
      }
    }
  }
  return res;
}

Scan global_augment(const Scan& scan, const GlobalAugmentParams& params, Rng& rng) {
  const double theta = params.yaw.sample(rng);
  const double tx = params.translation.sample(rng);
  const double ty = params.translation.sample(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool mirror_x = unit(rng) < params.flip_x;
  const bool mirror_y = unit(rng) < params.flip_y;

  const double cs = std::cos(theta), sn = std::sin(theta);
  auto move = [&](Point3& p) {
    p = {cs * p.x - sn * p.y + tx, sn * p.x + cs * p.y + ty, p.z};
    if (mirror_x) p.x = -p.x;
    if (mirror_y) p.y = -p.y;
  };

  Scan out = scan;
  for (auto& p : out.points) move(p);
  for (auto& b : out.boxes) {
    move(b.center);
    double yaw = b.yaw + theta;
    if (mirror_x) yaw = kPi - yaw;
    if (mirror_y) yaw = -yaw;
    b.yaw = normalize_yaw(yaw);
  }
  return out;
}

InjectResult augment_training_scan(const Scan& scan, std::span<const InstanceBank> banks,
                                   std::span<const ClassStats> stats, const AugmentConfig& config, Rng& rng) {
  InjectResult res = inject(scan, banks, stats, config.injection, rng);
  res.scan = global_augment(res.scan, config.global, rng);
  return res;
}

}  // namespace mdt3d
