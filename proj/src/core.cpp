#include "v2xl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>

namespace v2xl {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::invalid_pose: return "invalid-pose";
    case ErrorKind::frame: return "frame";
    case ErrorKind::shape: return "shape";
    case ErrorKind::ratio: return "ratio";
    case ErrorKind::format: return "format";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::truncation: return "truncation";
    case ErrorKind::version: return "version";
    case ErrorKind::size: return "size";
    case ErrorKind::routing: return "routing";
    case ErrorKind::sync_timeout: return "sync-timeout";
    case ErrorKind::measurement: return "measurement";
    case ErrorKind::simulation: return "simulation";
  }
  return "unknown";
}

const char* to_string(ObjectClass c) noexcept {
  switch (c) {
    case ObjectClass::car: return "car";
    case ObjectClass::pedestrian: return "pedestrian";
    case ObjectClass::truck: return "truck";
  }
  return "unknown";
}

double normalize_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Pose validated(const Pose& pose) {
  for (double v : {pose.x, pose.y, pose.z, pose.roll, pose.pitch, pose.yaw}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_pose, "non-finite pose component");
  }
  Pose out = pose;
  out.yaw = normalize_angle(pose.yaw);
  return out;
}

Rigid3 Rigid3::from_pose(const Pose& pose) {
  const double cr = std::cos(pose.roll), sr = std::sin(pose.roll);
  const double cp = std::cos(pose.pitch), sp = std::sin(pose.pitch);
  const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
  Rigid3 m;
  m.r = {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
         sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
         -sp,     cp * sr,                cp * cr};
  m.t = {pose.x, pose.y, pose.z};
  return m;
}

Rigid3 Rigid3::inverse() const {
  Rigid3 inv;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) inv.r[i * 3 + j] = r[j * 3 + i];
  for (int i = 0; i < 3; ++i) {
    inv.t[i] = -(inv.r[i * 3] * t[0] + inv.r[i * 3 + 1] * t[1] + inv.r[i * 3 + 2] * t[2]);
  }
  return inv;
}

std::array<double, 3> Rigid3::apply(double x, double y, double z) const {
  return {r[0] * x + r[1] * y + r[2] * z + t[0],
          r[3] * x + r[4] * y + r[5] * z + t[1],
          r[6] * x + r[7] * y + r[8] * z + t[2]};
}

Rigid3 operator*(const Rigid3& a, const Rigid3& b) {
  Rigid3 out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      out.r[i * 3 + j] = a.r[i * 3] * b.r[j] + a.r[i * 3 + 1] * b.r[3 + j] +
                         a.r[i * 3 + 2] * b.r[6 + j];
    }
    out.t[i] = a.r[i * 3] * b.t[0] + a.r[i * 3 + 1] * b.t[1] +
               a.r[i * 3 + 2] * b.t[2] + a.t[i];
  }
  return out;
}

PointCloud transform_points(const PointCloud& cloud, const FramePose& src,
                            const FramePose& dst) {
  if (cloud.frame != src.frame) {
    throw Error(ErrorKind::frame, "cloud tagged with frame " + std::to_string(cloud.frame) +
                                      ", expected " + std::to_string(src.frame));
  }
  const Pose s = validated(src.pose);
  const Pose d = validated(dst.pose);
  PointCloud out;
  out.frame = dst.frame;
  if (s == d) {
    out.points = cloud.points;
    return out;
  }
  const Rigid3 m = Rigid3::from_pose(d).inverse() * Rigid3::from_pose(s);
  out.points.reserve(cloud.points.size());
  for (const Point& p : cloud.points) {
    const auto q = m.apply(p.x, p.y, p.z);
    out.points.push_back(Point{q[0], q[1], q[2], p.intensity});
  }
  return out;
}

Pose relative_pose(const Pose& of, const Pose& in) {
  const Rigid3 m = Rigid3::from_pose(in).inverse() * Rigid3::from_pose(of);
  Pose p;
  p.x = m.t[0];
  p.y = m.t[1];
  p.z = m.t[2];
  // Z-Y-X decomposition.
  p.pitch = std::asin(std::clamp(-m.r[6], -1.0, 1.0));
  p.roll = std::atan2(m.r[7], m.r[8]);
  p.yaw = std::atan2(m.r[3], m.r[0]);
  return p;
}

Box3D transform_box(const Box3D& box, const Pose& src, const Pose& dst) {
  const Rigid3 m = Rigid3::from_pose(dst).inverse() * Rigid3::from_pose(src);
  const auto c = m.apply(box.cx, box.cy, box.cz);
  Box3D out = box;
  out.cx = c[0];
  out.cy = c[1];
  out.cz = c[2];
  out.yaw = normalize_angle(box.yaw + std::atan2(m.r[3], m.r[0]));
  return out;
}

std::array<std::array<double, 2>, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hl = box.length * 0.5, hw = box.width * 0.5;
  const std::array<std::array<double, 2>, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<std::array<double, 2>, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.cx + c * local[i][0] - s * local[i][1],
              box.cy + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

Rect bev_aabb(const Box3D& box) {
  const auto corners = bev_corners(box);
  Rect r{corners[0][0], corners[0][1], corners[0][0], corners[0][1]};
  for (const auto& p : corners) {
    r.min_x = std::min(r.min_x, p[0]);
    r.min_y = std::min(r.min_y, p[1]);
    r.max_x = std::max(r.max_x, p[0]);
    r.max_y = std::max(r.max_y, p[1]);
  }
  return r;
}

namespace {

using Vec2 = std::array<double, 2>;

double cross(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }

bool inside(const Box3D& box, const Vec2& p, double eps) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double dx = p[0] - box.cx, dy = p[1] - box.cy;
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= box.length * 0.5 + eps && std::abs(v) <= box.width * 0.5 + eps;
}

// Area of the convex intersection, built from the corners of each box lying
// inside the other plus all pairwise edge crossings, ordered by angle.
double intersection_area(const Box3D& a, const Box3D& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const double scale = std::max({a.length, a.width, b.length, b.width});
  const double eps = 1e-12 * scale;

  std::vector<Vec2> pts;
  pts.reserve(24);
  for (const auto& p : ca)
    if (inside(b, p, eps)) pts.push_back(p);
  for (const auto& p : cb)
    if (inside(a, p, eps)) pts.push_back(p);

  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& p = ca[i];
    const Vec2 r{ca[(i + 1) % 4][0] - p[0], ca[(i + 1) % 4][1] - p[1]};
    for (std::size_t j = 0; j < 4; ++j) {
      const Vec2& q = cb[j];
      const Vec2 s{cb[(j + 1) % 4][0] - q[0], cb[(j + 1) % 4][1] - q[1]};
      const double denom = cross(r, s);
      if (std::abs(denom) <= 1e-14 * scale * scale) continue;
      const Vec2 qp{q[0] - p[0], q[1] - p[1]};
      const double t = cross(qp, s) / denom;
      const double u = cross(qp, r) / denom;
      if (t >= -1e-12 && t <= 1.0 + 1e-12 && u >= -1e-12 && u <= 1.0 + 1e-12) {
        pts.push_back({p[0] + t * r[0], p[1] + t * r[1]});
      }
    }
  }
  if (pts.size() < 3) return 0.0;

  Vec2 centroid{0, 0};
  for (const auto& p : pts) {
    centroid[0] += p[0];
    centroid[1] += p[1];
  }
  centroid[0] /= static_cast<double>(pts.size());
  centroid[1] /= static_cast<double>(pts.size());
  std::vector<std::pair<double, Vec2>> ordered;
  ordered.reserve(pts.size());
  for (const auto& p : pts) {
    ordered.emplace_back(std::atan2(p[1] - centroid[1], p[0] - centroid[0]), p);
  }
  std::sort(ordered.begin(), ordered.end());

  double twice_area = 0.0;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const Vec2& p = ordered[i].second;
    const Vec2& q = ordered[(i + 1) % ordered.size()].second;
    twice_area += (p[0] - centroid[0]) * (q[1] - centroid[1]) -
                  (q[0] - centroid[0]) * (p[1] - centroid[1]);
  }
  return std::max(0.0, 0.5 * twice_area);
}

auto bev_key(const Box3D& b) { return std::tie(b.cx, b.cy, b.length, b.width, b.yaw); }

}  // namespace

double iou_bev(const Box3D& a, const Box3D& b) {
  // Fixed argument order makes the result exactly symmetric.
  const bool swap = bev_key(b) < bev_key(a);
  const Box3D& first = swap ? b : a;
  const Box3D& second = swap ? a : b;

  if (!bev_aabb(first).intersects(bev_aabb(second))) return 0.0;
  const double inter = intersection_area(first, second);
  if (inter <= 0.0) return 0.0;
  const double uni = first.length * first.width + second.length * second.width - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace v2xl
