#include <cmath>
#include <filesystem>

#include "ap_fixtures.hpp"
#include "doctest.h"
#include "scenes.hpp"
#include "v2xl/evaluation.hpp"
#include "v2xl/logio.hpp"
#include "v2xl/replay.hpp"
#include "v2xl/scenario.hpp"

using namespace v2xl;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::simulation;
}

ScenarioConfig small_config(std::uint64_t seed = 3) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.agents = 3;
  cfg.duration_s = 0.5;
  cfg.ground_points = 1000;
  return cfg;
}

PipelineConfig light(PipelineConfig c) {
  c.grid.channels = 16;
  c.ratio = 4;
  return c;
}

bool inside_footprint(const Box3D& b, double x, double y) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double u = c * (x - b.cx) + s * (y - b.cy);
  const double v = -s * (x - b.cx) + c * (y - b.cy);
  return std::abs(u) <= b.length / 2 && std::abs(v) <= b.width / 2;
}

// Dense march along the segment.
bool occluded_by_sampling(const std::array<double, 2>& from, const std::array<double, 2>& to,
                          const std::vector<Box3D>& boxes, std::size_t skip) {
  const int steps = 4000;
  for (int k = 0; k <= steps; ++k) {
    const double t = double(k) / steps;
    const double x = from[0] + t * (to[0] - from[0]), y = from[1] + t * (to[1] - from[1]);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (i != skip && inside_footprint(boxes[i], x, y)) return true;
    }
  }
  return false;
}

std::size_t points_inside(const PointCloud& cloud, const Pose& pose, const Box3D& world_box) {
  const Box3D local = transform_box(world_box, Pose{}, pose);
  std::size_t n = 0;
  for (const auto& p : cloud.points) n += inside_footprint(local, p.x, p.y) && p.z > -pose.z + 0.08;
  return n;
}

}  // namespace

TEST_CASE("generation is deterministic and sized by duration and rate") {
  ScenarioConfig cfg;
  cfg.seed = 9;
  cfg.agents = 2;
  cfg.duration_s = 10;
  cfg.rate_hz = 10;
  cfg.ground_points = 50;
  cfg.surface_density = 2;
  const auto a = generate_scenario(cfg);
  const auto b = generate_scenario(cfg);
  REQUIRE(a.logs.size() == 2);
  CHECK(a.logs[0].frames.size() == 100);
  CHECK(a.logs == b.logs);
  CHECK(a.scenario.actors == b.scenario.actors);
  CHECK(a.scenario.frame_stamp(1) - a.scenario.frame_stamp(0) == Duration::from_ms(100));

  cfg.seed = 10;
  CHECK(!(generate_scenario(cfg).logs == a.logs));

  cfg.keyframe_stride = 5;
  CHECK(generate_scenario(cfg).scenario.key_frames().size() == 20);
}

TEST_CASE("scenario config errors") {
  ScenarioConfig cfg;
  cfg.duration_s = 0;
  CHECK(kind_of([&] { generate_scenario(cfg); }) == ErrorKind::config);
  cfg = {};
  cfg.keyframe_stride = 0;
  CHECK(kind_of([&] { generate_scenario(cfg); }) == ErrorKind::config);
  cfg = {};
  cfg.agents = 0;
  CHECK(kind_of([&] { generate_scenario(cfg); }) == ErrorKind::config);
}

TEST_CASE("occlusion test agrees with a sampled ray") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Box3D> boxes;
    for (int i = 0; i < 4; ++i) {
      Box3D b;
      b.cx = rng.uniform(-20, 20);
      b.cy = rng.uniform(-20, 20);
      b.length = rng.uniform(1, 8);
      b.width = rng.uniform(1, 3);
      b.yaw = rng.uniform(-3, 3);
      boxes.push_back(b);
    }
    const std::array<double, 2> from{rng.uniform(-25, 25), rng.uniform(-25, 25)};
    const std::array<double, 2> to{boxes[0].cx, boxes[0].cy};
    if (inside_footprint(boxes[1], from[0], from[1]) || inside_footprint(boxes[2], from[0], from[1]) ||
        inside_footprint(boxes[3], from[0], from[1])) {
      continue;
    }
    const bool exact = occluded(from, to, boxes, 0);
    const bool sampled = occluded_by_sampling(from, to, boxes, 0);
    // Grazing hits can slip between samples; only a sampled hit is binding.
    if (sampled) CHECK(exact);
    if (!exact) CHECK(!sampled);
  }
}

TEST_CASE("a parked truck hides the car behind it") {
  const auto gen = generate_scenario(scene::occlusion(0.2));
  const Scenario& sc = gen.scenario;
  const Timestamp t = sc.frame_stamp(0);
  const auto world = sc.actor_boxes(t);
  const auto& ego = gen.logs[0].frames[0];
  const auto& rsu = gen.logs[1].frames[0];
  CHECK(points_inside(ego.cloud, ego.pose, world[0]) > 50);  // truck
  CHECK(points_inside(ego.cloud, ego.pose, world[1]) == 0);  // hidden car
  CHECK(points_inside(ego.cloud, ego.pose, world[2]) > 50);
  CHECK(points_inside(rsu.cloud, rsu.pose, world[1]) > 50);
  CHECK(sc.ground_truth(0, t).size() == 3);
}

TEST_CASE("frame logs, scenarios and records survive disk") {
  const auto gen = generate_scenario(small_config());
  const auto dir = std::filesystem::temp_directory_path() / "v2xl_harness_logs";
  std::filesystem::remove_all(dir);
  save_frame_logs(dir, gen.logs);
  const auto back = load_frame_logs(dir);
  REQUIRE(back.size() == gen.logs.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == round_to_disk(gen.logs[i]));
  std::filesystem::remove_all(dir);
  CHECK(kind_of([&] { load_frame_logs(dir); }) == ErrorKind::io);

  const Scenario sc = scenario_from_json(scenario_to_json(gen.scenario));
  CHECK(sc.agents == gen.scenario.agents);
  CHECK(sc.actors == gen.scenario.actors);
  CHECK(sc.frame_count() == gen.scenario.frame_count());
  CHECK(sc.ground_truth(0, sc.frame_stamp(2)) == gen.scenario.ground_truth(0, sc.frame_stamp(2)));

  const auto records = replay(gen.logs, gen.scenario, light(PipelineConfig::offline(FusionMode::late)),
                              LinkModel::ideal());
  const auto json = record_to_json(records);
  const auto again = records_from_json(json);
  REQUIRE(again.size() == 1);
  CHECK(record_to_json(again) == json);
  CHECK(std::isinf(again[0].link.b_bytes_per_ms));
  CHECK(again[0].config.window.is_infinite());
  CHECK(kind_of([] { records_from_json("{not json"); }) == ErrorKind::format);
}

TEST_CASE("replay without fusion is the ego's own detector") {
  const auto gen = generate_scenario(small_config());
  const PipelineConfig cfg = light(PipelineConfig::online(FusionMode::none));
  const auto rec = replay(gen.logs, gen.scenario, cfg, LinkModel::paper_wifi());
  REQUIRE(rec.size() == 1);
  REQUIRE(rec[0].frames.size() == gen.logs[0].frames.size());
  for (std::size_t k = 0; k < rec[0].frames.size(); ++k) {
    const auto& f = gen.logs[0].frames[k];
    const auto grid = pillarize(f.cloud, cfg.grid, FramePose{0, f.pose});
    CHECK(rec[0].frames[k].detections.boxes == detect(grid, cfg.detector).boxes);
    CHECK(rec[0].frames[k].messages.empty());
  }
  const auto ideal = replay(gen.logs, gen.scenario, cfg, LinkModel::ideal());
  CHECK(ideal[0].frames == rec[0].frames);
}

TEST_CASE("an empty collaborator changes nothing under max fusion") {
  auto gen = generate_scenario(small_config());
  for (std::size_t a = 1; a < gen.logs.size(); ++a) {
    for (auto& f : gen.logs[a].frames) f.cloud.points.clear();
  }
  const auto none = replay(gen.logs, gen.scenario, light(PipelineConfig::offline(FusionMode::none)),
                           LinkModel::ideal());
  const auto fused = replay(gen.logs, gen.scenario,
                            light(PipelineConfig::offline(FusionMode::intermediate_max)),
                            LinkModel::ideal());
  for (std::size_t k = 0; k < none[0].frames.size(); ++k) {
    CHECK(fused[0].frames[k].detections.boxes == none[0].frames[k].detections.boxes);
    CHECK(fused[0].frames[k].messages.size() == gen.logs.size() - 1);
  }
}

TEST_CASE("late fusion over a dead link equals no fusion") {
  const auto gen = generate_scenario(small_config());
  LinkModel dead;
  dead.a_ms = INFINITY;
  const auto none = replay(gen.logs, gen.scenario, light(PipelineConfig::offline(FusionMode::none)), dead);
  const auto late = replay(gen.logs, gen.scenario, light(PipelineConfig::offline(FusionMode::late)), dead);
  for (std::size_t k = 0; k < none[0].frames.size(); ++k) {
    CHECK(late[0].frames[k].detections.boxes == none[0].frames[k].detections.boxes);
    CHECK(late[0].frames[k].messages.empty());
  }
}

TEST_CASE("recorded stage latencies follow the profiles") {
  const auto gen = generate_scenario(small_config());
  PipelineConfig cfg = light(PipelineConfig::offline(FusionMode::intermediate_attention));
  cfg.encoder_profile = "paper-encoder";
  cfg.decoder_profile = "paper-decoder";
  const auto rec = replay(gen.logs, gen.scenario, cfg, LinkModel::paper_wifi());
  std::size_t seen = 0;
  for (const auto& f : rec[0].frames) {
    for (const auto& m : f.messages) {
      ++seen;
      CHECK(m.kind == MsgType::intermediate);
      CHECK(m.encoder == stage_timings("paper-encoder"));
      CHECK(m.decoder == stage_timings("paper-decoder"));
      CHECK(m.transport.ns == LinkModel::paper_wifi().base_delay_ns(m.bytes));
    }
  }
  CHECK(seen > 0);
}

TEST_CASE("replay config errors") {
  const auto gen = generate_scenario(small_config());
  PipelineConfig cfg = light(PipelineConfig::offline(FusionMode::intermediate_max));
  cfg.ratio = 3;
  CHECK(kind_of([&] { replay(gen.logs, gen.scenario, cfg, LinkModel::ideal()); }) == ErrorKind::config);
  cfg = light(PipelineConfig::offline(FusionMode::late));
  cfg.fusion_delay = Duration::from_ms(100);
  CHECK(kind_of([&] { replay(gen.logs, gen.scenario, cfg, LinkModel::ideal()); }) == ErrorKind::config);
  cfg = light(PipelineConfig::offline(FusionMode::late));
  cfg.egos = {7};
  CHECK(kind_of([&] { replay(gen.logs, gen.scenario, cfg, LinkModel::ideal()); }) == ErrorKind::config);
  cfg.egos = {0};
  cfg.encoder_profile = "fast";
  CHECK(kind_of([&] { replay(gen.logs, gen.scenario, cfg, LinkModel::ideal()); }) == ErrorKind::config);
  auto ragged = gen.logs;
  ragged[1].frames.pop_back();
  CHECK(kind_of([&] { replay(ragged, gen.scenario, light(PipelineConfig::offline(FusionMode::none)),
                             LinkModel::ideal()); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_fusion_mode("mid"); }) == ErrorKind::config);
  CHECK(parse_fusion_mode("intermediate-max") == FusionMode::intermediate_max);
  CHECK(std::string(to_string(FusionMode::intermediate_attention)) == "intermediate-attention");
}

TEST_CASE("alignment to key frames") {
  ScenarioConfig cfg = scene::occlusion(1.0);
  ActorSpec far = class_template(ObjectClass::car);
  far.x = 150;
  cfg.actors.push_back(far);
  const auto gen = generate_scenario(cfg);
  const Scenario& sc = gen.scenario;

  RunRecord rec;
  rec.ego_id = 0;
  for (double offset_ms : {0.0, 30.0, 70.0}) {
    FrameOutput f;
    f.stamp = sc.frame_stamp(2) + Duration::from_ms(offset_ms);
    rec.frames.push_back(f);
  }
  FrameOutput late_frame;
  late_frame.stamp = sc.frame_stamp(9) + Duration::from_ms(60);
  rec.frames.push_back(late_frame);

  const Alignment al = align(rec, sc);
  REQUIRE(al.pairs.size() == 3);
  CHECK(al.pairs[0].key == sc.frame_stamp(2));
  CHECK(al.pairs[1].key == sc.frame_stamp(2));
  CHECK(al.pairs[2].key == sc.frame_stamp(3));
  CHECK(al.skipped == 1);  // 60 ms past the last key frame
  CHECK(al.pairs[0].ground_truth.size() == 3);  // x = 150 is outside the region
  CHECK(align(rec, sc, 0.2).pairs.size() == 1);
}

TEST_CASE("average precision on hand-worked fixtures") {
  for (const auto& c : fixture::ap_cases()) {
    CAPTURE(c.name);
    const auto ap = average_precision(c.pairs, c.cls, c.iou_thr);
    REQUIRE(ap.has_value() == c.expected.has_value());
    if (ap) CHECK(std::abs(*ap - *c.expected) < 1e-9);
  }
}

TEST_CASE("recall counts every class") {
  using fixture::box;
  std::vector<FramePair> pairs{fixture::frame({box(0), box(20, 1, ObjectClass::truck)},
                                              {box(0), box(20, 1, ObjectClass::truck), box(40)})};
  pairs[0].ground_truth[1].length = 4;
  CHECK(recall(pairs, 0.5) == doctest::Approx(2.0 / 3.0));
  CHECK(recall(std::vector<FramePair>{}, 0.5) == 0.0);
}

TEST_CASE("a perfect run scores mAP 1") {
  const auto gen = generate_scenario(small_config());
  const Scenario& sc = gen.scenario;
  RunRecord rec;
  rec.ego_id = 0;
  for (std::size_t k = 0; k < sc.frame_count(); ++k) {
    FrameOutput f;
    f.stamp = sc.frame_stamp(k);
    f.detections.boxes = sc.ground_truth(0, f.stamp);
    rec.frames.push_back(f);
  }
  const Report r = evaluate(rec, sc);
  CHECK(r.ap.size() == 8);
  CHECK(r.map(0.5).value() == doctest::Approx(1.0));
  CHECK(r.map(0.3).value() == doctest::Approx(1.0));
  CHECK(r.recall_05 == doctest::Approx(1.0));
  CHECK(r.frames == sc.frame_count());
  CHECK(r.ap_csv().rfind("class,iou_thr,ap\n", 0) == 0);
  CHECK(r.latency_csv().rfind("stage,mean_ms,p95_ms\n", 0) == 0);
}
