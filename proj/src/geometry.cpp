#include "mdt3d/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "mdt3d/error.hpp"

namespace mdt3d {

namespace {

double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }

Point2 sub(const Point2& a, const Point2& b) { return {a.x - b.x, a.y - b.y}; }

}  // namespace

double normalize_yaw(double yaw) {
  double r = yaw - kTwoPi * std::floor((yaw + kPi) / kTwoPi);
  if (r >= kPi) r -= kTwoPi;
  if (r < -kPi) r += kTwoPi;
  return r;
}

bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

void validate_box(const Box3D& box) {
  if (!is_finite(box.center) || !std::isfinite(box.yaw)) {
    throw DataError("box '" + box.label + "' has non-finite pose");
  }
  const auto& d = box.dims;
  if (!(std::isfinite(d.l) && std::isfinite(d.w) && std::isfinite(d.h)) ||
      !(d.l > 0.0 && d.w > 0.0 && d.h > 0.0)) {
    throw DataError("box '" + box.label + "' has non-positive or non-finite dimensions");
  }
  if (!(box.yaw >= -kPi && box.yaw < kPi)) {
    throw DataError("box '" + box.label + "' yaw not normalized to [-pi, pi)");
  }
}

std::array<Point2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = box.dims.l / 2.0;
  const double hw = box.dims.w / 2.0;
  // Local corners in CCW order; a rotation preserves orientation.
  const std::array<Point2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Point2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.center.x + c * local[i].x - s * local[i].y,
              box.center.y + s * local[i].x + c * local[i].y};
  }
  return out;
}

Point3 to_box_frame(const Box3D& box, const Point3& p) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = p.x - box.center.x;
  const double dy = p.y - box.center.y;
  return {c * dx + s * dy, -s * dx + c * dy, p.z - box.center.z};
}

Point3 from_box_frame(const Box3D& box, const Point3& local) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  return {box.center.x + c * local.x - s * local.y,
          box.center.y + s * local.x + c * local.y,
          box.center.z + local.z};
}

bool point_in_box(const Box3D& box, const Point3& p) {
  const Point3 q = to_box_frame(box, p);
  return std::abs(q.x) <= box.dims.l / 2.0 + kContainmentSlack &&
         std::abs(q.y) <= box.dims.w / 2.0 + kContainmentSlack &&
         std::abs(q.z) <= box.dims.h / 2.0 + kContainmentSlack;
}

double polygon_area(std::span<const Point2> poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    twice += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return twice / 2.0;
}

std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip) {
  std::vector<Point2> out(subject.begin(), subject.end());
  std::vector<Point2> in;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 edge = sub(clip[(e + 1) % clip.size()], a);
    in.swap(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2 p = in[i];
      const Point2 q = in[(i + 1) % in.size()];
      const double sp = cross(edge, sub(p, a));
      const double sq = cross(edge, sub(q, a));
      const bool p_in = sp >= 0.0;
      const bool q_in = sq >= 0.0;
      if (p_in) out.push_back(p);
      if (p_in != q_in) {
        const double denom = sp - sq;
        if (std::abs(denom) >= kParallelEps) {
          const double t = sp / denom;
          out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
        }
      }
    }
  }
  return out;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const auto poly = clip_convex(ca, cb);
  const double area = std::max(0.0, polygon_area(poly));
  return std::min({area, a.bev_area(), b.bev_area()});
}

double z_overlap(const Box3D& a, const Box3D& b) {
  const double lo = std::max(a.center.z - a.dims.h / 2.0, b.center.z - b.dims.h / 2.0);
  const double hi = std::min(a.center.z + a.dims.h / 2.0, b.center.z + b.dims.h / 2.0);
  return std::max(0.0, hi - lo);
}

double iou3d(const Box3D& a, const Box3D& b) {
  const double dz = z_overlap(a, b);
  if (dz <= 0.0) return 0.0;
  // Quick reject on circumscribed circles before clipping.
  const double ra = std::hypot(a.dims.l, a.dims.w) / 2.0;
  const double rb = std::hypot(b.dims.l, b.dims.w) / 2.0;
  const double dxy = std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
  if (dxy > ra + rb) return 0.0;
  const double inter = bev_intersection_area(a, b) * dz;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace mdt3d
