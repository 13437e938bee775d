#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "v2xl/error.hpp"

namespace v2xl {

// Nanoseconds since epoch (GPS-synchronized).
struct Timestamp {
  std::uint64_t ns = 0;

  static constexpr Timestamp from_ms(double ms) {
    return Timestamp{static_cast<std::uint64_t>(ms * 1e6 + 0.5)};
  }
  constexpr double ms() const { return static_cast<double>(ns) * 1e-6; }

  auto operator<=>(const Timestamp&) const = default;
};

// Signed span of time, nanoseconds.
struct Duration {
  std::int64_t ns = 0;

  static constexpr Duration from_ms(double ms) {
    return Duration{static_cast<std::int64_t>(ms * 1e6 + (ms >= 0 ? 0.5 : -0.5))};
  }
  static constexpr Duration infinite() {
    return Duration{std::numeric_limits<std::int64_t>::max()};
  }
  constexpr bool is_infinite() const {
    return ns == std::numeric_limits<std::int64_t>::max();
  }
  constexpr double ms() const { return static_cast<double>(ns) * 1e-6; }

  auto operator<=>(const Duration&) const = default;
};

// Saturating at zero and at the maximum representable stamp.
constexpr Timestamp operator+(Timestamp t, Duration d) {
  if (d.is_infinite()) return Timestamp{std::numeric_limits<std::uint64_t>::max()};
  if (d.ns >= 0) {
    const auto add = static_cast<std::uint64_t>(d.ns);
    return Timestamp{t.ns > std::numeric_limits<std::uint64_t>::max() - add
                         ? std::numeric_limits<std::uint64_t>::max()
                         : t.ns + add};
  }
  const auto sub = static_cast<std::uint64_t>(-(d.ns + 1)) + 1;
  return Timestamp{t.ns < sub ? 0 : t.ns - sub};
}
constexpr Timestamp operator-(Timestamp t, Duration d) {
  if (d.ns == std::numeric_limits<std::int64_t>::min()) return t + Duration::infinite();
  return t + Duration{-d.ns};
}
constexpr Duration operator-(Timestamp a, Timestamp b) {
  return Duration{static_cast<std::int64_t>(a.ns - b.ns)};
}

// Rigid pose, intrinsic roll-pitch-yaw (R = Rz(yaw) Ry(pitch) Rx(roll)),
// right-handed, x forward.
struct Pose {
  double x = 0, y = 0, z = 0;
  double roll = 0, pitch = 0, yaw = 0;

  bool operator==(const Pose&) const = default;
};

// Wraps into (-pi, pi].
double normalize_angle(double radians);

// Throws invalid_pose on any non-finite component; returns the pose with yaw
// normalized.
Pose validated(const Pose& pose);

// Homogeneous rigid transform with a row-major 3x3 rotation.
struct Rigid3 {
  std::array<double, 9> r{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> t{0, 0, 0};

  static Rigid3 from_pose(const Pose& pose);
  Rigid3 inverse() const;
  std::array<double, 3> apply(double x, double y, double z) const;
};

Rigid3 operator*(const Rigid3& a, const Rigid3& b);

// Coordinate-frame tag; the id of the agent whose local frame the data is in.
using FrameId = std::uint32_t;

struct Point {
  double x = 0, y = 0, z = 0;
  double intensity = 0;

  bool operator==(const Point&) const = default;
};

struct PointCloud {
  std::vector<Point> points;
  FrameId frame = 0;

  bool operator==(const PointCloud&) const = default;
};

// A pose paired with the frame it places.
struct FramePose {
  FrameId frame = 0;
  Pose pose;
};

// Maps every point from src's frame into dst's frame (dst^-1 * src).
PointCloud transform_points(const PointCloud& cloud, const FramePose& src,
                            const FramePose& dst);

// Relative pose expressing `of` in the coordinates of `in`.
Pose relative_pose(const Pose& of, const Pose& in);

enum class ObjectClass : std::uint8_t { car = 0, pedestrian = 1, truck = 2 };
inline constexpr std::array<ObjectClass, 3> kAllClasses{
    ObjectClass::car, ObjectClass::pedestrian, ObjectClass::truck};
const char* to_string(ObjectClass c) noexcept;

struct Box3D {
  double cx = 0, cy = 0, cz = 0;
  double length = 1, width = 1, height = 1;
  double yaw = 0;
  ObjectClass cls = ObjectClass::car;
  double score = 1;

  bool operator==(const Box3D&) const = default;
};

// BEV footprint corners, counter-clockwise.
std::array<std::array<double, 2>, 4> bev_corners(const Box3D& box);

// Axis-aligned BEV bounding rectangle of the footprint.
struct Rect {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  bool intersects(const Rect& o) const {
    return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y &&
           o.min_y <= max_y;
  }
};
Rect bev_aabb(const Box3D& box);

// Intersection over union of the two yawed footprints in the x-y plane.
double iou_bev(const Box3D& a, const Box3D& b);

// Box expressed in another frame: center mapped, yaw offset by the relative
// heading.
Box3D transform_box(const Box3D& box, const Pose& src, const Pose& dst);

struct DetectionSet {
  Timestamp stamp;
  std::uint32_t agent_id = 0;
  std::vector<Box3D> boxes;

  bool operator==(const DetectionSet&) const = default;
};

enum class AgentKind : std::uint8_t { vehicle = 0, infrastructure = 1 };

struct AgentMeta {
  std::uint32_t agent_id = 0;
  AgentKind kind = AgentKind::vehicle;
  Pose pose;
  Timestamp stamp;
};

}  // namespace v2xl
