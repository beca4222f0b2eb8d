#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mdt3d/error.hpp"
#include "mdt3d/eval.hpp"
#include "mdt3d/pipeline.hpp"
#include "support.hpp"

using namespace mdt3d;
using testing::TempDir;

TEST_CASE("StagedOutput") {
  TempDir dir;
  const auto target = dir / "out";
  {
    StagedOutput s(target, false);
    write_file(s.path() / "a.txt", "1");
    CHECK_FALSE(fs::exists(target));
  }
  CHECK_FALSE(fs::exists(target));
  CHECK_FALSE(fs::exists(dir / "out.partial"));
  {
    StagedOutput s(target, false);
    write_file(s.path() / "a.txt", "1");
    s.commit();
  }
  CHECK(read_file(target / "a.txt") == "1");
  CHECK_THROWS_AS(StagedOutput(target, false), ConfigError);
  {
    StagedOutput s(target, true);
    write_file(s.path() / "b.txt", "2");
    s.commit();
  }
  CHECK(fs::exists(target / "b.txt"));
  CHECK_FALSE(fs::exists(target / "a.txt"));
}

TEST_CASE("rebase_manifest keeps scans reachable") {
  TempDir dir;
  const auto m = generate_synthetic_dataset(testing::once_like(3), 1, dir / "src");
  const auto r = rebase_manifest(m, dir / "elsewhere/deep");
  fs::create_directories(dir / "elsewhere/deep");
  write_manifest(r, dir / "elsewhere/deep/manifest.json");
  const auto back = read_manifest(dir / "elsewhere/deep/manifest.json");
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(load_scan(back, i) == load_scan(m, i));
}

TEST_CASE("pipeline config validation") {
  TempDir dir;
  const auto a = generate_synthetic_dataset(testing::kitti_like(3), 1, dir / "a");
  const auto b = generate_synthetic_dataset(testing::once_like(3), 1, dir / "b");
  PipelineConfig c;
  c.training = {dir / "a/manifest.json"};
  c.target = dir / "b/manifest.json";
  c.output = dir / "out";
  CHECK_NOTHROW(validate_pipeline_config(c));
  c.training.push_back(dir / "b/manifest.json");
  CHECK_THROWS_AS(validate_pipeline_config(c), ConfigError);
  c.training = {dir / "a/manifest.json"};
  c.target_dataset_id = "kitti";
  CHECK_THROWS_AS(validate_pipeline_config(c), ConfigError);
  c.target_dataset_id.clear();
  c.training.clear();
  CHECK_THROWS_AS(validate_pipeline_config(c), ConfigError);
  c.training = {dir / "a/manifest.json"};
  c.eval_fraction = 0;
  CHECK_THROWS_AS(validate_pipeline_config(c), ConfigError);
}

TEST_CASE("run_pipeline end to end") {
  TempDir dir;
  generate_synthetic_dataset(testing::kitti_like(6), 1, dir / "kitti");
  generate_synthetic_dataset(testing::once_like(5), 2, dir / "once");
  generate_synthetic_dataset(testing::nuscenes_like(7), 3, dir / "nuscenes");
  generate_synthetic_dataset(testing::waymo_like(10), 4, dir / "waymo");
  PipelineConfig c;
  c.training = {dir / "kitti/manifest.json", dir / "once/manifest.json", dir / "nuscenes/manifest.json"};
  c.target = dir / "waymo/manifest.json";
  c.output = dir / "out";
  c.seed = 11;
  c.epochs = 2;
  const auto res = run_pipeline(c);
  CHECK(res.plans.size() == 2);
  CHECK(res.plans[0].entries.size() == 15);
  CHECK(res.eval_manifest.size() == 2);
  REQUIRE(res.epochs.size() == 2);
  const auto& ep = res.epochs[0];
  CHECK(ep.manifest.size() == 15);
  CHECK(ep.report.total_requested() > 0);
  CHECK(ep.report.total_injected() + ep.report.total_shortfall() == ep.report.total_requested());
  for (const char* f : {"seeds.txt", "stats/kitti.kv", "banks/once.bank.idx", "epochs/epoch_001.plan",
                        "epochs/epoch_000/manifest.json", "epochs/epoch_000/sources.txt",
                        "epochs/epoch_000/inject_report.kv", "eval/manifest.json", "harmonized/waymo/manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "out" / f), f);
  }
  const auto m = read_manifest(dir / "out/epochs/epoch_000/manifest.json");
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (const auto& b : load_scan_labels(m, i)) REQUIRE(parse_coarse_label(b.label).has_value());
  }

  const auto eval_m = read_manifest(dir / "out/eval/manifest.json");
  const auto gts = load_ground_truth(eval_m);
  CHECK(evaluate(echo_ground_truth(gts), eval_m, EvalConfig{}).map == 1.0);

  SUBCASE("worker count does not change artifacts") {
    c.output = dir / "out4";
    c.workers = 4;
    (void)run_pipeline(c);
    for (const auto& e : fs::recursive_directory_iterator(dir / "out")) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), dir / "out");
      REQUIRE_MESSAGE(read_file(e.path()) == read_file(dir / "out4" / rel), rel.string());
    }
  }
}
