#include "v2xl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "v2xl/rng.hpp"

namespace v2xl {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

struct Lane {
  double y;
  double speed;  // signed, along x
};

// Vehicle lanes either side of the agents' lane (y = 0) and two sidewalks.
constexpr Lane kRoadLanes[] = {{-8.0, -9.0}, {-4.0, -6.0}, {4.0, 6.0}, {8.0, 10.0}};
constexpr Lane kSidewalks[] = {{-12.0, -1.3}, {12.0, 1.2}};

std::vector<AgentSpec> default_agents(std::size_t count) {
  std::vector<AgentSpec> out;
  for (std::size_t i = 0; i < count; ++i) {
    AgentSpec a;
    a.id = static_cast<std::uint32_t>(i);
    if (i == 0) {
      a.start = Pose{-40.0, 0.0, 1.8, 0, 0, 0};
      a.vx = 8.0;
    } else if (i % 2 == 1) {
      // Roadside units alternate sides of the road, 30 m apart.
      a.kind = AgentKind::infrastructure;
      const double side = (i / 2) % 2 == 0 ? 1.0 : -1.0;
      a.start = Pose{10.0 - 30.0 * static_cast<double>(i / 2), 15.0 * side, 5.0, 0, 0,
                     -side * std::numbers::pi / 2};
    } else {
      a.start = Pose{-40.0 - 20.0 * static_cast<double>(i / 2), 0.0, 1.8, 0, 0, 0};
      a.vx = 8.0;
    }
    out.push_back(a);
  }
  return out;
}

std::vector<ActorSpec> random_actors(const ScenarioConfig& cfg, Rng& rng) {
  std::vector<ActorSpec> out;
  std::vector<std::vector<std::pair<double, double>>> road(std::size(kRoadLanes));
  std::vector<std::vector<std::pair<double, double>>> walk(std::size(kSidewalks));

  auto place = [&](ObjectClass cls, const Lane* lanes, std::size_t lane_count,
                   std::vector<std::vector<std::pair<double, double>>>& taken, double gap) {
    ActorSpec a = class_template(cls);
    for (int attempt = 0; attempt < 200; ++attempt) {
      const std::size_t lane = rng.below(lane_count);
      const double x = rng.uniform(-95.0, 95.0);
      const double lo = x - a.length / 2 - gap, hi = x + a.length / 2 + gap;
      const bool clear = std::none_of(taken[lane].begin(), taken[lane].end(), [&](const auto& iv) {
        return lo < iv.second && iv.first < hi;
      });
      if (!clear) continue;
      taken[lane].emplace_back(x - a.length / 2, x + a.length / 2);
      a.x = x;
      a.y = lanes[lane].y;
      a.vx = lanes[lane].speed;
      a.yaw = a.vx >= 0 ? 0.0 : std::numbers::pi;
      out.push_back(a);
      return;
    }
  };
  for (std::size_t i = 0; i < cfg.trucks; ++i)
    place(ObjectClass::truck, kRoadLanes, std::size(kRoadLanes), road, 4.0);
  for (std::size_t i = 0; i < cfg.cars; ++i)
    place(ObjectClass::car, kRoadLanes, std::size(kRoadLanes), road, 4.0);
  for (std::size_t i = 0; i < cfg.pedestrians; ++i)
    place(ObjectClass::pedestrian, kSidewalks, std::size(kSidewalks), walk, 2.0);
  return out;
}

// Liang-Barsky test of the segment against the box footprint.
bool segment_hits_box(const std::array<double, 2>& p0, const std::array<double, 2>& p1,
                      const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  auto local = [&](const std::array<double, 2>& p) {
    const double dx = p[0] - box.cx, dy = p[1] - box.cy;
    return std::array<double, 2>{c * dx + s * dy, -s * dx + c * dy};
  };
  const auto a = local(p0), b = local(p1);
  const double hl = box.length / 2, hw = box.width / 2;
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a[0] + hl, hl - a[0], a[1] + hw, hw - a[1]};
  for (int k = 0; k < 4; ++k) {
    if (p[k] == 0.0) {
      if (q[k] < 0.0) return false;
      continue;
    }
    const double r = q[k] / p[k];
    if (p[k] < 0.0) t0 = std::max(t0, r);
    else t1 = std::min(t1, r);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (agent_specs.empty() && agents < 1) throw Error(ErrorKind::config, "scenario needs at least one agent");
  if (!(duration_s > 0)) throw Error(ErrorKind::config, "scenario duration must be positive");
  if (!(rate_hz > 0)) throw Error(ErrorKind::config, "frame rate must be positive");
  if (keyframe_stride == 0) throw Error(ErrorKind::config, "keyframe stride must be >= 1");
  region.validate();
}

ActorSpec class_template(ObjectClass cls) {
  ActorSpec a;
  a.cls = cls;
  switch (cls) {
    case ObjectClass::car: a.length = 4.5; a.width = 1.9; a.height = 1.6; break;
    case ObjectClass::pedestrian: a.length = 0.8; a.width = 0.8; a.height = 1.75; break;
    case ObjectClass::truck: a.length = 9.0; a.width = 2.6; a.height = 3.4; break;
  }
  return a;
}

std::size_t Scenario::frame_count() const {
  return static_cast<std::size_t>(std::llround(config.duration_s * config.rate_hz));
}

Duration Scenario::period() const {
  return Duration{std::llround(1e9 / config.rate_hz)};
}

Timestamp Scenario::frame_stamp(std::size_t frame) const {
  return Timestamp{config.start_ns + frame * static_cast<std::uint64_t>(period().ns)};
}

std::vector<Timestamp> Scenario::key_frames() const {
  std::vector<Timestamp> out;
  for (std::size_t k = 0; k < frame_count(); k += config.keyframe_stride) out.push_back(frame_stamp(k));
  return out;
}

namespace {

double seconds_since_start(const ScenarioConfig& cfg, Timestamp t) {
  return (static_cast<double>(t.ns) - static_cast<double>(cfg.start_ns)) * 1e-9;
}

}  // namespace

Pose Scenario::agent_pose(std::uint32_t agent_id, Timestamp t) const {
  for (const auto& a : agents) {
    if (a.id != agent_id) continue;
    const double dt = seconds_since_start(config, t);
    Pose p = a.start;
    p.x += a.vx * dt;
    p.y += a.vy * dt;
    return p;
  }
  throw Error(ErrorKind::config, "scenario has no agent " + std::to_string(agent_id));
}

AgentKind Scenario::agent_kind(std::uint32_t agent_id) const {
  for (const auto& a : agents)
    if (a.id == agent_id) return a.kind;
  throw Error(ErrorKind::config, "scenario has no agent " + std::to_string(agent_id));
}

std::vector<Box3D> Scenario::actor_boxes(Timestamp t) const {
  const double dt = seconds_since_start(config, t);
  std::vector<Box3D> out;
  out.reserve(actors.size());
  for (const auto& a : actors) {
    Box3D b;
    b.cx = a.x + a.vx * dt;
    b.cy = a.y + a.vy * dt;
    b.cz = a.height / 2;
    b.length = a.length;
    b.width = a.width;
    b.height = a.height;
    b.yaw = a.yaw;
    b.cls = a.cls;
    b.score = 1.0;
    out.push_back(b);
  }
  return out;
}

std::vector<Box3D> Scenario::ground_truth(std::uint32_t ego_id, Timestamp t) const {
  const Pose ego = agent_pose(ego_id, t);
  auto boxes = actor_boxes(t);
  for (auto& b : boxes) b = transform_box(b, Pose{}, ego);
  return boxes;
}

bool occluded(const std::array<double, 2>& sensor, const std::array<double, 2>& target,
              const std::vector<Box3D>& boxes, std::size_t skip) {
  const Rect seg{std::min(sensor[0], target[0]), std::min(sensor[1], target[1]),
                 std::max(sensor[0], target[0]), std::max(sensor[1], target[1])};
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (i == skip) continue;
    if (!bev_aabb(boxes[i]).intersects(seg)) continue;
    if (segment_hits_box(sensor, target, boxes[i])) return true;
  }
  return false;
}

PointCloud sample_cloud(const Scenario& scenario, std::uint32_t agent_id, Timestamp t,
                        std::uint64_t frame_seed) {
  const ScenarioConfig& cfg = scenario.config;
  const Pose pose = scenario.agent_pose(agent_id, t);
  const Rigid3 to_local = Rigid3::from_pose(pose).inverse();
  const std::array<double, 2> sensor{pose.x, pose.y};
  const auto boxes = scenario.actor_boxes(t);
  Rng rng(frame_seed);

  PointCloud cloud;
  cloud.frame = agent_id;
  auto emit = [&](double x, double y, double z, double intensity) {
    const auto q = to_local.apply(x, y, z);
    cloud.points.push_back(Point{q[0], q[1], q[2], intensity});
  };

  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box3D& b = boxes[i];
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const auto n = static_cast<std::size_t>(std::llround(cfg.surface_density * b.length * b.width));
    for (std::size_t k = 0; k < n; ++k) {
      const double u = rng.uniform(-0.5, 0.5) * b.length;
      const double v = rng.uniform(-0.5, 0.5) * b.width;
      const double z = rng.uniform(0.1, b.height);
      const double intensity = rng.uniform(0.4, 0.9);
      const std::array<double, 2> p{b.cx + c * u - s * v, b.cy + s * u + c * v};
      if (std::hypot(p[0] - sensor[0], p[1] - sensor[1]) > cfg.max_range) continue;
      if (occluded(sensor, p, boxes, i)) continue;
      emit(p[0], p[1], z, intensity);
    }
  }
  for (std::size_t k = 0; k < cfg.ground_points; ++k) {
    const double lx = rng.uniform(-cfg.max_range, cfg.max_range);
    const double ly = rng.uniform(-cfg.max_range / 2, cfg.max_range / 2);
    const double z = rng.uniform(-0.03, 0.03);
    const double intensity = rng.uniform(0.0, 0.1);
    // Ground points are generated in the agent's horizontal frame.
    const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
    emit(pose.x + cy * lx - sy * ly, pose.y + sy * lx + cy * ly, z, intensity);
  }
  return cloud;
}

GeneratedScenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  GeneratedScenario out;
  Scenario& sc = out.scenario;
  sc.config = cfg;
  Rng rng(mix(cfg.seed));
  sc.agents = cfg.agent_specs.empty() ? default_agents(cfg.agents) : cfg.agent_specs;
  sc.actors = cfg.actors.empty() ? random_actors(cfg, rng) : cfg.actors;
  for (auto& a : sc.agents) a.start = validated(a.start);
  sc.config.agents = sc.agents.size();
  std::sort(sc.agents.begin(), sc.agents.end(),
            [](const AgentSpec& a, const AgentSpec& b) { return a.id < b.id; });

  const std::size_t frames = sc.frame_count();
  for (const auto& agent : sc.agents) {
    FrameLog log;
    log.agent.agent_id = agent.id;
    log.agent.kind = agent.kind;
    log.agent.pose = agent.start;
    log.agent.stamp = sc.frame_stamp(0);
    log.rate_hz = cfg.rate_hz;
    log.frames.reserve(frames);
    for (std::size_t k = 0; k < frames; ++k) {
      const Timestamp t = sc.frame_stamp(k);
      const std::uint64_t frame_seed = mix(cfg.seed ^ mix((std::uint64_t{agent.id} << 32) | k));
      log.frames.push_back(LogFrame{t, sc.agent_pose(agent.id, t), sample_cloud(sc, agent.id, t, frame_seed)});
    }
    out.logs.push_back(std::move(log));
  }
  return out;
}

}  // namespace v2xl
