#pragma once

// Synthetic multi-agent scenes: actors on axis-aligned lanes, agents with
// LiDAR-like point sampling and BEV ray-cast occlusion.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "v2xl/core.hpp"
#include "v2xl/pillar.hpp"

namespace v2xl {

// Constant-velocity actor; yaw stays fixed.
struct ActorSpec {
  ObjectClass cls = ObjectClass::car;
  double length = 4.5, width = 1.9, height = 1.6;
  double x = 0, y = 0, yaw = 0;
  double vx = 0, vy = 0;

  bool operator==(const ActorSpec&) const = default;
};

struct AgentSpec {
  std::uint32_t id = 0;
  AgentKind kind = AgentKind::vehicle;
  Pose start;  // z is the sensor height above ground
  double vx = 0, vy = 0;

  bool operator==(const AgentSpec&) const = default;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::size_t agents = 2;
  double duration_s = 10.0;
  double rate_hz = 10.0;
  std::size_t keyframe_stride = 1;
  std::uint64_t start_ns = 1'000'000'000'000;  // GPS epoch offset of frame 0

  std::size_t cars = 14;
  std::size_t pedestrians = 8;
  std::size_t trucks = 3;

  double surface_density = 30.0;  // points per square meter of footprint
  std::size_t ground_points = 4000;
  double max_range = 120.0;

  // When non-empty these replace the randomly generated actors / agents.
  std::vector<ActorSpec> actors;
  std::vector<AgentSpec> agent_specs;

  GridSpec region;

  void validate() const;
};

// Canonical footprint and height per class.
ActorSpec class_template(ObjectClass cls);

struct Scenario {
  ScenarioConfig config;
  std::vector<AgentSpec> agents;
  std::vector<ActorSpec> actors;

  std::size_t frame_count() const;
  Duration period() const;
  Timestamp frame_stamp(std::size_t frame) const;
  std::vector<Timestamp> key_frames() const;

  Pose agent_pose(std::uint32_t agent_id, Timestamp t) const;
  AgentKind agent_kind(std::uint32_t agent_id) const;
  std::vector<Box3D> actor_boxes(Timestamp t) const;  // world frame
  // Every actor in the ego's frame at t, unclipped.
  std::vector<Box3D> ground_truth(std::uint32_t ego_id, Timestamp t) const;
};

struct LogFrame {
  Timestamp stamp;
  Pose pose;
  PointCloud cloud;  // agent-local frame

  bool operator==(const LogFrame&) const = default;
};

struct FrameLog {
  AgentMeta agent;
  double rate_hz = 10.0;
  std::vector<LogFrame> frames;

  bool operator==(const FrameLog& o) const {
    return agent.agent_id == o.agent.agent_id && agent.kind == o.agent.kind &&
           rate_hz == o.rate_hz && frames == o.frames;
  }
};

// True when the BEV segment from `sensor` to `target` crosses the footprint
// of any box other than boxes[skip].
bool occluded(const std::array<double, 2>& sensor, const std::array<double, 2>& target,
              const std::vector<Box3D>& boxes, std::size_t skip);

// Points an agent sees at time t, in its local frame.
PointCloud sample_cloud(const Scenario& scenario, std::uint32_t agent_id, Timestamp t,
                        std::uint64_t frame_seed);

struct GeneratedScenario {
  Scenario scenario;
  std::vector<FrameLog> logs;  // one per agent, ordered by agent id
};

GeneratedScenario generate_scenario(const ScenarioConfig& cfg);

}  // namespace v2xl
