#pragma once

#include <numbers>

#include "v2xl/scenario.hpp"

namespace scene {

// Ego at the origin looking down +x, a parked truck 15 m ahead hiding a car
// at 35 m, and a roadside unit 15 m to the side of the car.
inline v2xl::ScenarioConfig occlusion(double duration_s = 1.0) {
  using namespace v2xl;
  ScenarioConfig cfg;
  cfg.seed = 42;
  cfg.duration_s = duration_s;
  cfg.ground_points = 2000;

  AgentSpec ego;
  ego.id = 0;
  ego.start = Pose{0, 0, 1.8, 0, 0, 0};
  AgentSpec rsu;
  rsu.id = 1;
  rsu.kind = AgentKind::infrastructure;
  rsu.start = Pose{35, 15, 5, 0, 0, -std::numbers::pi / 2};
  cfg.agent_specs = {ego, rsu};

  ActorSpec truck = class_template(ObjectClass::truck);
  truck.x = 15;
  ActorSpec hidden = class_template(ObjectClass::car);
  hidden.x = 35;
  ActorSpec open = class_template(ObjectClass::car);
  open.x = 10;
  open.y = -8;
  cfg.actors = {truck, hidden, open};
  return cfg;
}

}  // namespace scene
