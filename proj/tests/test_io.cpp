#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mdt3d/error.hpp"
#include "mdt3d/io.hpp"
#include "mdt3d/stats.hpp"
#include "mdt3d/synth.hpp"
#include "support.hpp"

using namespace mdt3d;
using testing::TempDir;

TEST_CASE("load_scan of a two-point file with empty labels") {
  TempDir dir;
  write_points(dir / "a.pts", std::vector<Point3>{{0, 0, 0}, {1, 2, 3}});
  write_file(dir / "a.lbl", "");
  const Scan s = load_scan(dir / "a.pts", dir / "a.lbl", "ds", "a");
  REQUIRE(s.points.size() == 2);
  CHECK(s.points[1] == Point3{1, 2, 3});
  CHECK(s.boxes.empty());
  CHECK(fs::file_size(dir / "a.pts") == 24);
}

TEST_CASE("point file layout is little-endian float32 x y z") {
  TempDir dir;
  write_points(dir / "p.pts", std::vector<Point3>{{1.0, -2.0, 0.5}});
  const std::string bytes = read_file(dir / "p.pts");
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000, 0.5f = 0x3f000000
  const std::string expected("\x00\x00\x80\x3f\x00\x00\x00\xc0\x00\x00\x00\x3f", 12);
  CHECK(bytes == expected);
}

TEST_CASE("label line with KITTI mean car size") {
  TempDir dir;
  write_file(dir / "c.lbl", "Car 0.1 5 0 -0.8 3.9 1.6 1.5\n");
  write_points(dir / "c.pts", std::vector<Point3>{});
  const Scan s = load_scan(dir / "c.pts", dir / "c.lbl", "kitti");
  REQUIRE(s.boxes.size() == 1);
  const Box3D& b = s.boxes[0];
  CHECK(b.label == "Car");
  CHECK(b.yaw == 0.1);
  CHECK(b.center == Point3{5, 0, -0.8});
  CHECK(b.dims == Dims{3.9, 1.6, 1.5});
}

TEST_CASE("truncated point file is a malformed-record error") {
  TempDir dir;
  write_file(dir / "t.pts", std::string(25, '\0'));
  write_file(dir / "t.lbl", "");
  try {
    (void)load_scan(dir / "t.pts", dir / "t.lbl", "ds");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("t.pts") != std::string::npos);
    CHECK(msg.find("offset 24") != std::string::npos);
  }
}

TEST_CASE("malformed label lines name file and line") {
  TempDir dir;
  write_file(dir / "m.lbl", "Car 0 1 2 3 4 5 6\nCar 0 1 2 3 4 5\n");
  try {
    (void)read_labels(dir / "m.lbl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("m.lbl:2") != std::string::npos);
  }
  write_file(dir / "n.lbl", "Car 0 1 2 3 -4 5 6\n");
  CHECK_THROWS_AS((void)read_labels(dir / "n.lbl"), DataError);
  write_file(dir / "o.lbl", "Car 0 1 2 3 4x 5 6\n");
  CHECK_THROWS_AS((void)read_labels(dir / "o.lbl"), DataError);
}

TEST_CASE("missing files are I/O errors") {
  CHECK_THROWS_AS((void)read_points("/nonexistent/x.pts"), IoError);
}

TEST_CASE("save_scan / load_scan round trip") {
  TempDir dir;
  SUBCASE("empty scan") {
    Scan s;
    s.dataset_id = "ds";
    save_scan(s, dir / "e.pts", dir / "e.lbl");
    CHECK(fs::file_size(dir / "e.pts") == 0);
    CHECK(fs::file_size(dir / "e.lbl") == 0);
    CHECK(load_scan(dir / "e.pts", dir / "e.lbl", "ds") == s);
  }
  SUBCASE("seeded random scans at float32 precision") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-80, 80);
    for (int trial = 0; trial < 5; ++trial) {
      Scan s;
      s.dataset_id = "ds";
      s.scan_id = "r" + std::to_string(trial);
      for (int i = 0; i < 1000; ++i) {
        s.points.push_back({static_cast<float>(u(rng)), static_cast<float>(u(rng)), static_cast<float>(u(rng) / 10)});
      }
      for (int i = 0; i < 7; ++i) s.boxes.push_back(testing::random_box(rng, 40));
      save_scan(s, dir / "r.pts", dir / "r.lbl");
      CHECK(load_scan(dir / "r.pts", dir / "r.lbl", "ds", s.scan_id) == s);
    }
  }
  SUBCASE("unnormalized yaw is stored normalized") {
    Scan s;
    s.boxes.push_back(Box3D{"Car", 3.5, {1, 2, 3}, {4, 2, 1.5}});
    save_scan(s, dir / "y.pts", dir / "y.lbl");
    const auto back = read_labels(dir / "y.lbl");
    CHECK(back[0].yaw == doctest::Approx(3.5 - kTwoPi));
    CHECK(back[0].yaw < kPi);
  }
}

TEST_CASE("format_double round-trips exactly") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(!parse_double("1.0x"));
  CHECK(!parse_double(""));
}

TEST_CASE("parse_kitti_label_line") {
  const KittiConvention conv;
  SUBCASE("DontCare is skipped") {
    CHECK_FALSE(parse_kitti_label_line("DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10", conv)
                    .has_value());
  }
  SUBCASE("camera frame to canonical with bottom-to-center lift") {
    // h w l = 1.5 1.6 3.9; camera (x, y, z) = (0, 1.65, 10); ry = 0.
    // Default axis map: canonical x = cam z = 10, y = -cam x = 0,
    // z = -cam y = -1.65, lifted by h/2 to -0.9. Yaw = -ry - pi/2.
    const auto obj = parse_kitti_label_line("Car 0.00 0 -1.58 587 173 614 200 1.5 1.6 3.9 0 1.65 10 0", conv, 3);
    REQUIRE(obj.has_value());
    CHECK(obj->raw_class == "Car");
    CHECK(obj->box.center.x == doctest::Approx(10.0));
    CHECK(obj->box.center.y == doctest::Approx(0.0));
    CHECK(obj->box.center.z == doctest::Approx(-1.65 + 0.75));
    CHECK(obj->box.dims == Dims{3.9, 1.6, 1.5});
    CHECK(obj->box.yaw == doctest::Approx(-kPi / 2));
  }
  SUBCASE("convention is taken from config") {
    KittiConvention c;
    c.bottom_center = false;
    c.translation = {0.27, 0.0, -0.08};
    const auto obj = parse_kitti_label_line("Van 0 0 0 0 0 0 0 2 2 5 1 1.5 20 0.5", c);
    REQUIRE(obj.has_value());
    CHECK(obj->box.center.x == doctest::Approx(20.27));
    CHECK(obj->box.center.y == doctest::Approx(-1.0));
    CHECK(obj->box.center.z == doctest::Approx(-1.58));
    CHECK(obj->box.yaw == doctest::Approx(normalize_yaw(-0.5 - kPi / 2)));
  }
  SUBCASE("wrong field count is an error naming the line") {
    try {
      (void)parse_kitti_label_line("Car 0 0 0 0 0 0 0 1.5 1.6 3.9 0 1.65 10", conv, 7);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
  }
  SUBCASE("trailing detection score is allowed") {
    CHECK(parse_kitti_label_line("Car 0 0 0 0 0 0 0 1.5 1.6 3.9 0 1.65 10 0 0.93", conv).has_value());
  }
}

TEST_CASE("manifest and descriptor golden files") {
  TempDir dir;
  DatasetManifest m;
  m.dataset_id = "once";
  m.descriptor = "descriptor.json";
  m.scans = {{"000000", "000000.pts", "000000.lbl"}, {"000001", "000001.pts", "000001.lbl"}};
  write_manifest(m, dir / "manifest.json");
  CHECK(read_file(dir / "manifest.json") == R"({
  "dataset_id": "once",
  "descriptor": "descriptor.json",
  "format": "mdt3d-manifest/1",
  "harmonized": false,
  "scans": [
    {
      "id": "000000",
      "labels": "000000.lbl",
      "points": "000000.pts"
    },
    {
      "id": "000001",
      "labels": "000001.lbl",
      "points": "000001.pts"
    }
  ]
}
)");
  // No point file exists: opening a manifest never touches point data.
  const auto back = read_manifest(dir / "manifest.json");
  CHECK(back.scans == m.scans);
  CHECK(back.resolve("000001.pts") == dir / "000001.pts");

  DatasetDescriptor d;
  d.dataset_id = "waymo";
  d.label_map = {{"Vehicle", VehicleByVolume{}}, {"Pedestrian", CoarseLabel::Pedestrian},
                 {"Cyclist", CoarseLabel::TwoWheels}};
  d.z_offset = 0.37;
  write_descriptor(d, dir / "descriptor.json");
  CHECK(read_file(dir / "descriptor.json") == R"({
  "annotation_fov": null,
  "dataset_id": "waymo",
  "format": "mdt3d-descriptor/1",
  "label_map": {
    "Cyclist": "TwoWheels",
    "Pedestrian": "Pedestrian",
    "Vehicle": "VEHICLE_BY_VOLUME"
  },
  "volume_clusters": 3,
  "z_offset": 0.37
}
)");
  CHECK(read_descriptor(dir / "descriptor.json") == d);

  d.annotation_fov = kPi / 2;
  d.kitti = KittiConvention{};
  d.class_stats = {{"SmallVehicle", 3.8}};
  write_descriptor(d, dir / "d2.json");
  CHECK(read_descriptor(dir / "d2.json") == d);
}

TEST_CASE("manifest validation") {
  TempDir dir;
  write_file(dir / "dup.json",
             R"({"format":"mdt3d-manifest/1","dataset_id":"x","descriptor":"d.json","harmonized":false,
                 "scans":[{"id":"a","points":"a.pts","labels":"a.lbl"},{"id":"a","points":"b.pts","labels":"b.lbl"}]})");
  CHECK_THROWS_AS((void)read_manifest(dir / "dup.json"), ConfigError);
  write_file(dir / "empty.json",
             R"({"format":"mdt3d-manifest/1","dataset_id":"x","descriptor":"d.json","harmonized":false,"scans":[]})");
  CHECK_THROWS_AS((void)read_manifest(dir / "empty.json"), ConfigError);
  write_file(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS((void)read_manifest(dir / "bad.json"), ConfigError);
}

TEST_CASE("synthetic generator") {
  TempDir dir;
  SUBCASE("deterministic under seed, byte for byte") {
    const auto spec = testing::once_like(4);
    const auto a = generate_synthetic_dataset(spec, 17, dir / "a");
    const auto b = generate_synthetic_dataset(spec, 17, dir / "b");
    const auto c = generate_synthetic_dataset(spec, 18, dir / "c");
    for (const auto& e : a.scans) {
      CHECK(read_file(dir / "a" / e.points) == read_file(dir / "b" / e.points));
      CHECK(read_file(dir / "a" / e.labels) == read_file(dir / "b" / e.labels));
    }
    CHECK(read_file(dir / "a/manifest.json") == read_file(dir / "b/manifest.json"));
    CHECK(read_file(dir / "a/descriptor.json") == read_file(dir / "b/descriptor.json"));
    CHECK(read_file(dir / "a/000000.pts") != read_file(dir / "c/000000.pts"));
  }
  SUBCASE("zero classes yields points only") {
    SyntheticSpec s;
    s.dataset_id = "empty";
    s.scan_count = 3;
    s.background_points = 100;
    const auto m = generate_synthetic_dataset(s, 1, dir / "e");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Scan scan = load_scan(m, i);
      CHECK(scan.points.size() == 100);
      CHECK(scan.boxes.empty());
    }
  }
  SUBCASE("emitted dataset satisfies its descriptor and spec means") {
    SyntheticSpec s;
    s.dataset_id = "kitti";
    s.scan_count = 10;
    const Dims sigma{0.2, 0.1, 0.1};
    s.classes = {testing::synth_class("Car", CoarseLabel::SmallVehicle, 3.8, {3.9, 1.6, 1.5}, sigma, 30)};
    const auto m = generate_synthetic_dataset(s, 2024, dir / "k");
    const auto desc = read_descriptor(m.descriptor_path());
    const auto report = compute_stats(m);
    const auto* car = report.find("Car");
    REQUIRE(car != nullptr);
    for (const auto& [raw, c] : report.classes) CHECK(desc.label_map.contains(raw));
    const double n = static_cast<double>(car->instances);
    CHECK(std::abs(car->mean_dims.l - 3.9) <= 2 * sigma.l / std::sqrt(n));
    CHECK(std::abs(car->mean_dims.w - 1.6) <= 2 * sigma.w / std::sqrt(n));
    CHECK(std::abs(car->mean_dims.h - 1.5) <= 2 * sigma.h / std::sqrt(n));
    MESSAGE("cars: " << car->instances << " over " << report.scans << " scans");
  }
}

TEST_CASE("synthetic spec file") {
  TempDir dir;
  write_file(dir / "spec.json", R"({
    "dataset_id": "waymo", "scans": 2, "fov": null, "z_offset": 0.4,
    "classes": [
      {"label": "Vehicle", "target": "VEHICLE_BY_VOLUME", "per_scan": 5,
       "shapes": [{"weight": 0.9, "dims": [4.4, 1.8, 1.6]}, {"weight": 0.1, "dims": [10.7, 2.9, 3.3], "sigma": [0.1, 0.1, 0.1]}]}
    ]})");
  const auto s = read_synthetic_spec(dir / "spec.json");
  CHECK(s.dataset_id == "waymo");
  CHECK(s.scan_count == 2);
  CHECK(s.z_offset == 0.4);
  REQUIRE(s.classes.size() == 1);
  CHECK(std::holds_alternative<VehicleByVolume>(s.classes[0].target));
  CHECK(s.classes[0].shapes.size() == 2);
  write_file(dir / "bad.json", R"({"dataset_id": "x", "scans": 1, "classes": [{"label": "A", "target": "Truck", "per_scan": 1, "shapes": []}]})");
  CHECK_THROWS_AS((void)read_synthetic_spec(dir / "bad.json"), ConfigError);
}
