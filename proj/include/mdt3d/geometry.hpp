#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace mdt3d {

/// Canonical frame: x forward, y left, z up, meters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Dims {
  double l = 0.0;
  double w = 0.0;
  double h = 0.0;
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Gravity-aligned box with a single heading angle. `center` is the
/// volumetric center (not the bottom face). `label` holds either the
/// dataset's raw class name or a coarse label name after harmonization.
struct Box3D {
  std::string label;
  double yaw = 0.0;
  Point3 center;
  Dims dims;

  double volume() const { return dims.l * dims.w * dims.h; }
  double bev_area() const { return dims.l * dims.w; }
  friend bool operator==(const Box3D&, const Box3D&) = default;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Absolute slack on each half-extent in point_in_box. Absorbs the round-off
/// of composing a rigid transform with its inverse; far below sensor precision.
inline constexpr double kContainmentSlack = 1e-9;

/// Cross products below this magnitude are treated as parallel edges.
inline constexpr double kParallelEps = 1e-12;

/// Maps any finite angle into [-pi, pi).
double normalize_yaw(double yaw);

/// Throws DataError unless dims are positive, all fields finite and yaw is
/// normalized.
void validate_box(const Box3D& box);

bool is_finite(const Point3& p);

/// Footprint corners, counterclockwise, starting from the front-left corner.
std::array<Point2, 4> bev_corners(const Box3D& box);

/// Expresses p in the box frame (origin at center, yaw removed).
Point3 to_box_frame(const Box3D& box, const Point3& p);
/// Inverse of to_box_frame.
Point3 from_box_frame(const Box3D& box, const Point3& local);

/// Boundary-inclusive containment test.
bool point_in_box(const Box3D& box, const Point3& p);

/// Shoelace area; positive for counterclockwise polygons.
double polygon_area(std::span<const Point2> poly);

/// Clips `subject` against the half-planes of the convex CCW polygon `clip`.
std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip);

double bev_intersection_area(const Box3D& a, const Box3D& b);

/// Overlap length of the boxes' vertical extents, 0 when disjoint.
double z_overlap(const Box3D& a, const Box3D& b);

/// Volumetric IoU of two yaw-only boxes.
double iou3d(const Box3D& a, const Box3D& b);

}  // namespace mdt3d
