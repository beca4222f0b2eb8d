#include "mdt3d/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "mdt3d/error.hpp"
#include "mdt3d/rng.hpp"

namespace mdt3d {

namespace {

constexpr std::uint64_t kShuffleKey = 0x53485546464c45ULL;  // "SHUFFLE"
constexpr std::uint64_t kEvalKey = 0x4556414cULL;           // "EVAL"

}  // namespace

EpochPlan plan_epoch(std::span<const DatasetManifest> manifests, std::size_t epoch, std::uint64_t base_seed,
                     std::optional<std::size_t> per_dataset) {
  if (manifests.empty()) throw ConfigError("epoch planning needs at least one dataset");
  std::set<std::string> ids;
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto& man : manifests) {
    if (man.scans.empty()) throw ConfigError("dataset '" + man.dataset_id + "' has an empty manifest");
    if (!ids.insert(man.dataset_id).second) throw ConfigError("dataset '" + man.dataset_id + "' listed twice");
    m = std::min(m, man.size());
  }
  if (per_dataset) {
    if (*per_dataset == 0 || *per_dataset > m) {
      throw ConfigError("per-dataset scan count must be in [1, " + std::to_string(m) + "]");
    }
    m = *per_dataset;
  }

  EpochPlan plan;
  plan.epoch = epoch;
  plan.seed = base_seed;
  plan.per_dataset = m;
  plan.entries.reserve(m * manifests.size());
  for (const auto& man : manifests) {
    Rng rng = make_stream(base_seed, epoch, stable_hash(man.dataset_id));
    std::vector<ScanEntry> picked;
    picked.reserve(m);
    std::sample(man.scans.begin(), man.scans.end(), std::back_inserter(picked), m, rng);
    for (const auto& e : picked) plan.entries.push_back({man.dataset_id, e.scan_id});
  }
  Rng shuffle_rng = make_stream(base_seed, epoch, kShuffleKey);
  std::shuffle(plan.entries.begin(), plan.entries.end(), shuffle_rng);
  return plan;
}

DatasetManifest subsample_eval(const DatasetManifest& manifest, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("eval fraction must be in (0, 1]");
  const auto m = manifest.size();
  // The small slack keeps e.g. 0.2 * 100 from rounding up to 21.
  const auto n = std::min<std::size_t>(m, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9)));
  DatasetManifest out = manifest;
  out.scans.clear();
  Rng rng = make_stream(seed, kEvalKey, stable_hash(manifest.dataset_id));
  std::sample(manifest.scans.begin(), manifest.scans.end(), std::back_inserter(out.scans), n, rng);
  return out;
}

std::string format_plan(const EpochPlan& plan) {
  std::string out = "# epoch=" + std::to_string(plan.epoch) + " seed=" + std::to_string(plan.seed) +
                    " per_dataset=" + std::to_string(plan.per_dataset) + "\n";
  for (const auto& e : plan.entries) out += e.dataset_id + ' ' + e.scan_id + '\n';
  return out;
}

EpochPlan parse_plan(std::string_view text) {
  EpochPlan plan;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "plan line " + std::to_string(line_no);
    if (!header) {
      if (line[0] != '#') throw DataError(where + ": missing '# epoch= seed= per_dataset=' header");
      std::istringstream hs(line.substr(1));
      std::string kv;
      int seen = 0;
      while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw DataError(where + ": bad header field '" + kv + "'");
        const std::string k = kv.substr(0, eq);
        const std::string_view v = std::string_view(kv).substr(eq + 1);
        std::uint64_t value = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
        if (ec != std::errc{} || ptr != v.data() + v.size()) throw DataError(where + ": bad value in '" + kv + "'");
        if (k == "epoch") plan.epoch = value;
        else if (k == "seed") plan.seed = value;
        else if (k == "per_dataset") plan.per_dataset = value;
        else throw DataError(where + ": unknown header field '" + k + "'");
        ++seen;
      }
      if (seen != 3) throw DataError(where + ": header needs epoch, seed and per_dataset");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    PlanEntry e;
    std::string extra;
    if (!(ls >> e.dataset_id >> e.scan_id) || (ls >> extra)) {
      throw DataError(where + ": expected 'dataset_id scan_id'");
    }
    plan.entries.push_back(std::move(e));
  }
  if (!header) throw DataError("plan is empty");
  return plan;
}

}  // namespace mdt3d
