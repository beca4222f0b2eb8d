#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdt3d/io.hpp"

namespace mdt3d {

struct PlanEntry {
  std::string dataset_id;
  std::string scan_id;
  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

/// One balanced training epoch: `per_dataset` distinct scans from each
/// dataset, globally shuffled.
struct EpochPlan {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::size_t per_dataset = 0;
  std::vector<PlanEntry> entries;
  friend bool operator==(const EpochPlan&, const EpochPlan&) = default;
};

/// Each dataset draws from a stream keyed by (base_seed, epoch, dataset_id),
/// so its sample does not depend on manifest order; the concatenation is then
/// shuffled with a stream keyed by (base_seed, epoch). `per_dataset` defaults
/// to the smallest manifest size and may not exceed it.
EpochPlan plan_epoch(std::span<const DatasetManifest> manifests, std::size_t epoch, std::uint64_t base_seed,
                     std::optional<std::size_t> per_dataset = std::nullopt);

/// Fixed evaluation subset of ceil(fraction * m) scans in source order.
DatasetManifest subsample_eval(const DatasetManifest& manifest, double fraction, std::uint64_t seed);

/// `# epoch=<e> seed=<s> per_dataset=<m>` header then `dataset_id scan_id` lines.
std::string format_plan(const EpochPlan& plan);
EpochPlan parse_plan(std::string_view text);

}  // namespace mdt3d
