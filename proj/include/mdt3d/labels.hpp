#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace mdt3d {

/// Unified label set shared by all harmonized datasets. Vehicle labels are
/// ordered by size so that comparisons follow Small < Medium < Large.
enum class CoarseLabel : int {
  SmallVehicle = 0,
  MediumVehicle = 1,
  LargeVehicle = 2,
  TwoWheels = 3,
  Pedestrian = 4,
};

inline constexpr std::array<CoarseLabel, 5> kAllCoarseLabels{
    CoarseLabel::SmallVehicle, CoarseLabel::MediumVehicle, CoarseLabel::LargeVehicle,
    CoarseLabel::TwoWheels, CoarseLabel::Pedestrian};

inline constexpr std::array<CoarseLabel, 3> kVehicleLabels{
    CoarseLabel::SmallVehicle, CoarseLabel::MediumVehicle, CoarseLabel::LargeVehicle};

constexpr std::size_t index_of(CoarseLabel c) { return static_cast<std::size_t>(c); }

constexpr bool is_vehicle(CoarseLabel c) { return index_of(c) <= index_of(CoarseLabel::LargeVehicle); }

constexpr std::string_view to_string(CoarseLabel c) {
  switch (c) {
    case CoarseLabel::SmallVehicle: return "SmallVehicle";
    case CoarseLabel::MediumVehicle: return "MediumVehicle";
    case CoarseLabel::LargeVehicle: return "LargeVehicle";
    case CoarseLabel::TwoWheels: return "TwoWheels";
    case CoarseLabel::Pedestrian: return "Pedestrian";
  }
  return "?";
}

constexpr std::optional<CoarseLabel> parse_coarse_label(std::string_view s) {
  for (CoarseLabel c : kAllCoarseLabels) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

/// Parses or throws DataError naming the offending label.
CoarseLabel require_coarse_label(std::string_view s);

/// Fixed-size per-class table indexed by CoarseLabel.
template <typename T>
using PerClass = std::array<T, kAllCoarseLabels.size()>;

}  // namespace mdt3d
