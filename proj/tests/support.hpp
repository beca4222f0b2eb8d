#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>

#include "mdt3d/geometry.hpp"
#include "mdt3d/io.hpp"
#include "mdt3d/synth.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mdt3d") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline mdt3d::Box3D make_box(double x, double y, double z, double l, double w, double h, double yaw = 0.0,
                             std::string label = "SmallVehicle") {
  return mdt3d::Box3D{std::move(label), mdt3d::normalize_yaw(yaw), {x, y, z}, {l, w, h}};
}

inline mdt3d::Box3D random_box(std::mt19937_64& rng, double spread = 3.0) {
  std::uniform_real_distribution<double> pos(-spread, spread), dim(0.5, 5.0), ang(-mdt3d::kPi, mdt3d::kPi),
      zz(-0.5, 0.5);
  return make_box(pos(rng), pos(rng), zz(rng), dim(rng), dim(rng), dim(rng), ang(rng));
}

inline mdt3d::SyntheticClass synth_class(std::string raw, mdt3d::LabelTarget target, double per_scan,
                                         mdt3d::Dims dims, mdt3d::Dims sigma, double points = 40) {
  mdt3d::SyntheticClass c;
  c.raw_label = std::move(raw);
  c.target = target;
  c.per_scan = per_scan;
  c.points_per_object = points;
  c.shapes.push_back({1.0, dims, sigma});
  return c;
}

/// Small sources modeled on the per-scan means and mean sizes of KITTI, ONCE,
/// nuScenes and Waymo (cars / trucks / buses / pedestrians / cyclists).
inline mdt3d::SyntheticSpec kitti_like(std::size_t scans = 12) {
  using mdt3d::CoarseLabel;
  mdt3d::SyntheticSpec s;
  s.dataset_id = "kitti";
  s.scan_count = scans;
  s.annotation_fov = mdt3d::kPi / 2.0;
  s.ground_z = -1.73;
  s.z_offset = 0.0;
  s.background_points = 800;
  s.classes = {synth_class("Car", CoarseLabel::SmallVehicle, 3.8, {3.9, 1.6, 1.5}, {0.2, 0.08, 0.08}, 60),
               synth_class("Pedestrian", CoarseLabel::Pedestrian, 0.6, {0.8, 0.6, 1.8}, {0.05, 0.05, 0.05}, 30),
               synth_class("Cyclist", CoarseLabel::TwoWheels, 0.2, {1.8, 0.6, 1.7}, {0.05, 0.05, 0.05}, 30)};
  return s;
}

inline mdt3d::SyntheticSpec once_like(std::size_t scans = 10) {
  using mdt3d::CoarseLabel;
  mdt3d::SyntheticSpec s;
  s.dataset_id = "once";
  s.scan_count = scans;
  s.ground_z = -1.6;
  s.z_offset = -0.13;
  s.background_points = 800;
  s.range = 60;
  s.classes = {synth_class("Car", CoarseLabel::SmallVehicle, 19.8, {4.4, 1.8, 1.6}, {0.2, 0.08, 0.08}, 60),
               synth_class("Bus", CoarseLabel::LargeVehicle, 0.6, {10.7, 2.9, 3.3}, {0.3, 0.1, 0.1}, 120),
               synth_class("Truck", CoarseLabel::MediumVehicle, 0.6, {6.4, 2.4, 2.5}, {0.3, 0.1, 0.1}, 90),
               synth_class("Pedestrian", CoarseLabel::Pedestrian, 2.9, {0.8, 0.8, 1.7}, {0.05, 0.05, 0.05}, 20),
               synth_class("Cyclist", CoarseLabel::TwoWheels, 6.3, {2.1, 0.8, 1.3}, {0.05, 0.05, 0.05}, 20)};
  return s;
}

inline mdt3d::SyntheticSpec nuscenes_like(std::size_t scans = 14) {
  using mdt3d::CoarseLabel;
  mdt3d::SyntheticSpec s;
  s.dataset_id = "nuscenes";
  s.scan_count = scans;
  s.ground_z = -1.84;
  s.z_offset = 0.11;
  s.background_points = 600;
  s.classes = {synth_class("car", CoarseLabel::SmallVehicle, 11.0, {4.6, 2.0, 1.7}, {0.2, 0.08, 0.08}, 25),
               synth_class("bus", CoarseLabel::LargeVehicle, 0.5, {10.7, 2.9, 3.4}, {0.3, 0.1, 0.1}, 60),
               synth_class("truck", CoarseLabel::MediumVehicle, 2.2, {7.3, 2.5, 3.0}, {0.3, 0.1, 0.1}, 40),
               synth_class("pedestrian", CoarseLabel::Pedestrian, 5.7, {0.7, 0.7, 1.8}, {0.05, 0.05, 0.05}, 8),
               synth_class("bicycle", CoarseLabel::TwoWheels, 0.3, {1.7, 0.6, 1.3}, {0.05, 0.05, 0.05}, 8)};
  return s;
}

/// Single undifferentiated vehicle class with car / truck / bus size modes.
inline mdt3d::SyntheticSpec waymo_like(std::size_t scans = 8) {
  using mdt3d::CoarseLabel;
  mdt3d::SyntheticSpec s;
  s.dataset_id = "waymo";
  s.scan_count = scans;
  s.ground_z = -2.1;
  s.z_offset = 0.37;
  s.background_points = 800;
  s.range = 60;
  mdt3d::SyntheticClass v;
  v.raw_label = "Vehicle";
  v.target = mdt3d::VehicleByVolume{};
  v.per_scan = 15.0;
  v.points_per_object = 60;
  v.shapes = {{0.8, {4.4, 1.8, 1.6}, {0.15, 0.06, 0.06}},
              {0.12, {6.4, 2.4, 2.5}, {0.2, 0.08, 0.08}},
              {0.08, {10.7, 2.9, 3.3}, {0.3, 0.1, 0.1}}};
  s.classes = {v, synth_class("Pedestrian", CoarseLabel::Pedestrian, 6.0, {0.9, 0.8, 1.7}, {0.05, 0.05, 0.05}, 20),
               synth_class("Cyclist", CoarseLabel::TwoWheels, 0.3, {1.7, 0.8, 1.7}, {0.05, 0.05, 0.05}, 20)};
  return s;
}

}  // namespace testing
