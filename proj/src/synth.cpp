#include "mdt3d/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "mdt3d/error.hpp"
#include "mdt3d/rng.hpp"

namespace mdt3d {

using nlohmann::json;

namespace {

constexpr double kMinRange = 3.0;
constexpr int kPlacementAttempts = 50;
// Object returns are drawn strictly inside the box so that they are never
// ambiguous with neighbouring ground returns.
constexpr double kInteriorFraction = 0.96;

double positive_normal(Rng& rng, double mean, double sigma) {
  if (sigma <= 0.0) return mean;
  std::normal_distribution<double> nd(mean, sigma);
  return std::max(nd(rng), 0.1 * mean);
}

std::size_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<std::size_t>(mean)(rng);
}

const SyntheticShape& pick_shape(const SyntheticClass& cls, Rng& rng) {
  if (cls.shapes.size() == 1) return cls.shapes.front();
  std::vector<double> w;
  for (const auto& s : cls.shapes) w.push_back(s.weight);
  std::discrete_distribution<std::size_t> dd(w.begin(), w.end());
  return cls.shapes[dd(rng)];
}

Dims dims_from_json(const json& j) {
  const auto a = j.get<std::array<double, 3>>();
  return {a[0], a[1], a[2]};
}

std::string scan_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

}  // namespace

DatasetDescriptor synthetic_descriptor(const SyntheticSpec& spec) {
  DatasetDescriptor d;
  d.dataset_id = spec.dataset_id;
  for (const auto& c : spec.classes) d.label_map.emplace(c.raw_label, c.target);
  d.z_offset = spec.z_offset;
  d.annotation_fov = spec.annotation_fov;
  d.volume_clusters = spec.volume_clusters;
  return d;
}

SyntheticSpec read_synthetic_spec(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
    SyntheticSpec s;
    s.dataset_id = j.at("dataset_id").get<std::string>();
    s.scan_count = j.at("scans").get<std::size_t>();
    s.background_points = j.value("background_points", s.background_points);
    s.range = j.value("range", s.range);
    if (j.contains("fov") && !j["fov"].is_null()) s.annotation_fov = j["fov"].get<double>();
    s.ground_z = j.value("ground_z", s.ground_z);
    s.z_offset = j.value("z_offset", s.z_offset);
    s.volume_clusters = j.value("volume_clusters", s.volume_clusters);
    for (const auto& c : j.value("classes", json::array())) {
      SyntheticClass sc;
      sc.raw_label = c.at("label").get<std::string>();
      const auto target = c.at("target").get<std::string>();
      if (target == "VEHICLE_BY_VOLUME") {
        sc.target = VehicleByVolume{};
      } else {
        sc.target = require_coarse_label(target);
      }
      sc.per_scan = c.at("per_scan").get<double>();
      sc.points_per_object = c.value("points_per_object", sc.points_per_object);
      for (const auto& sh : c.at("shapes")) {
        sc.shapes.push_back({sh.value("weight", 1.0), dims_from_json(sh.at("dims")),
                             sh.contains("sigma") ? dims_from_json(sh["sigma"]) : Dims{}});
      }
      if (sc.shapes.empty()) throw ConfigError(path.string() + ": class '" + sc.raw_label + "' has no shapes");
      s.classes.push_back(std::move(sc));
    }
    if (s.dataset_id.empty() || s.scan_count == 0) {
      throw ConfigError(path.string() + ": dataset_id must be set and scans > 0");
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  Rng rng(derive_seed(seed, stable_hash(spec.dataset_id)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half_fov = spec.annotation_fov ? *spec.annotation_fov / 2.0 : kPi;

  DatasetManifest manifest;
  manifest.dataset_id = spec.dataset_id;
  manifest.descriptor = "descriptor.json";
  manifest.base_dir = out_dir;

  for (std::size_t si = 0; si < spec.scan_count; ++si) {
    Scan scan;
    scan.dataset_id = spec.dataset_id;
    scan.scan_id = scan_name(si);

    for (const auto& cls : spec.classes) {
      const std::size_t n = poisson(rng, cls.per_scan);
      for (std::size_t k = 0; k < n; ++k) {
        for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
          const auto& shape = pick_shape(cls, rng);
          Dims d{positive_normal(rng, shape.mean.l, shape.sigma.l), positive_normal(rng, shape.mean.w, shape.sigma.w),
                 positive_normal(rng, shape.mean.h, shape.sigma.h)};
          const double r = kMinRange + (spec.range - kMinRange) * std::sqrt(unit(rng));
          const double az = -half_fov + 2.0 * half_fov * unit(rng);
          const double yaw = normalize_yaw(-kPi + kTwoPi * unit(rng));
          Box3D box{cls.raw_label, yaw, {r * std::cos(az), r * std::sin(az), spec.ground_z + d.h / 2.0}, d};
          const bool collides = std::any_of(scan.boxes.begin(), scan.boxes.end(), [&](const Box3D& other) {
            return bev_intersection_area(box, other) > 0.0;
          });
          if (collides) continue;
          const std::size_t np = poisson(rng, cls.points_per_object);
          for (std::size_t p = 0; p < np; ++p) {
            const Point3 local{(unit(rng) - 0.5) * d.l * kInteriorFraction, (unit(rng) - 0.5) * d.w * kInteriorFraction,
                               (unit(rng) - 0.5) * d.h * kInteriorFraction};
            scan.points.push_back(from_box_frame(box, local));
          }
          scan.boxes.push_back(std::move(box));
          break;
        }
      }
    }

    // Ground returns over the full sweep; those falling inside a box are
    // discarded so per-box point counts equal the object returns.
    for (std::size_t p = 0; p < spec.background_points; ++p) {
      const double r = spec.range * std::sqrt(unit(rng));
      const double az = -kPi + kTwoPi * unit(rng);
      const Point3 pt{r * std::cos(az), r * std::sin(az), spec.ground_z};
      const bool inside = std::any_of(scan.boxes.begin(), scan.boxes.end(),
                                      [&](const Box3D& b) { return point_in_box(b, pt); });
      if (!inside) scan.points.push_back(pt);
    }

    ScanEntry entry{scan.scan_id, scan.scan_id + ".pts", scan.scan_id + ".lbl"};
    save_scan(scan, out_dir / entry.points, out_dir / entry.labels);
    manifest.scans.push_back(std::move(entry));
  }

  write_descriptor(synthetic_descriptor(spec), out_dir / manifest.descriptor);
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace mdt3d
