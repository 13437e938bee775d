#include "v2xl/logio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bytes.hpp"

namespace v2xl {

using nlohmann::json;
namespace fs = std::filesystem;
using detail::ByteReader;
using detail::ByteWriter;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  const std::string s = read_text(path);
  return {s.begin(), s.end()};
}

fs::path frame_file(const fs::path& dir, std::size_t k) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%06zu.bin", k);
  return dir / name;
}

const char* kind_name(AgentKind k) { return k == AgentKind::vehicle ? "vehicle" : "infrastructure"; }

AgentKind parse_kind(const std::string& s) {
  if (s == "vehicle") return AgentKind::vehicle;
  if (s == "infrastructure") return AgentKind::infrastructure;
  throw Error(ErrorKind::format, "unknown agent kind '" + s + "'");
}

// JSON has no infinity.
json num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double num(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw Error(ErrorKind::format, "bad number '" + s + "'");
  }
  return j.get<double>();
}

json pose_json(const Pose& p) { return json::array({p.x, p.y, p.z, p.roll, p.pitch, p.yaw}); }

Pose pose_from(const json& j) {
  return Pose{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
              j.at(3).get<double>(), j.at(4).get<double>(), j.at(5).get<double>()};
}

json box_json(const Box3D& b) {
  return json::array({b.cx, b.cy, b.cz, b.length, b.width, b.height, b.yaw,
                      static_cast<int>(b.cls), b.score});
}

Box3D box_from(const json& j) {
  Box3D b;
  b.cx = j.at(0).get<double>();
  b.cy = j.at(1).get<double>();
  b.cz = j.at(2).get<double>();
  b.length = j.at(3).get<double>();
  b.width = j.at(4).get<double>();
  b.height = j.at(5).get<double>();
  b.yaw = j.at(6).get<double>();
  const int cls = j.at(7).get<int>();
  if (cls < 0 || cls > 2) throw Error(ErrorKind::format, "bad object class");
  b.cls = static_cast<ObjectClass>(cls);
  b.score = j.at(8).get<double>();
  return b;
}

json grid_json(const GridSpec& g) {
  return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min}, {"y_max", g.y_max},
          {"voxel", g.voxel}, {"channels", g.channels}, {"lift_seed", g.lift_seed}};
}

GridSpec grid_from(const json& j) {
  GridSpec g;
  g.x_min = j.at("x_min");
  g.x_max = j.at("x_max");
  g.y_min = j.at("y_min");
  g.y_max = j.at("y_max");
  g.voxel = j.at("voxel");
  g.channels = j.at("channels");
  g.lift_seed = j.at("lift_seed");
  return g;
}

json stages_json(const StageTimings& s) {
  return json::array({s.compression.ns, s.device_transfer.ns, s.serialization.ns, s.packaging.ns});
}

StageTimings stages_from(const json& j) {
  return StageTimings{Duration{j.at(0)}, Duration{j.at(1)}, Duration{j.at(2)}, Duration{j.at(3)}};
}

template <class F>
auto parsing(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

void save_frame_log(const fs::path& dir, const FrameLog& log) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "agent_id=" << log.agent.agent_id << "\n"
           << "kind=" << kind_name(log.agent.kind) << "\n"
           << "rate_hz=" << log.rate_hz << "\n"
           << "frame_count=" << log.frames.size() << "\n";
  write_text(dir / "manifest.txt", manifest.str());
  for (std::size_t k = 0; k < log.frames.size(); ++k) {
    const LogFrame& f = log.frames[k];
    std::vector<std::uint8_t> buf;
    ByteWriter w(buf);
    w.u64(f.stamp.ns);
    for (double v : {f.pose.x, f.pose.y, f.pose.z, f.pose.roll, f.pose.pitch, f.pose.yaw}) w.f64(v);
    w.u32(static_cast<std::uint32_t>(f.cloud.points.size()));
    for (const auto& p : f.cloud.points) {
      w.f32(static_cast<float>(p.x));
      w.f32(static_cast<float>(p.y));
      w.f32(static_cast<float>(p.z));
      w.f32(static_cast<float>(p.intensity));
    }
    write_text(frame_file(dir, k), std::string(buf.begin(), buf.end()));
  }
}

FrameLog load_frame_log(const fs::path& dir) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_text(dir / "manifest.txt"));
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::format, "bad manifest line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"agent_id", "kind", "rate_hz", "frame_count"}) {
    if (!kv.contains(key)) throw Error(ErrorKind::format, std::string("manifest missing ") + key);
  }
  FrameLog log;
  std::size_t count = 0;
  try {
    log.agent.agent_id = static_cast<std::uint32_t>(std::stoul(kv["agent_id"]));
    log.rate_hz = std::stod(kv["rate_hz"]);
    count = std::stoul(kv["frame_count"]);
  } catch (const std::exception&) {
    throw Error(ErrorKind::format, "bad manifest value in " + dir.string());
  }
  log.agent.kind = parse_kind(kv["kind"]);
  for (std::size_t k = 0; k < count; ++k) {
    const auto buf = read_bytes(frame_file(dir, k));
    ByteReader r(buf);
    LogFrame f;
    f.stamp = Timestamp{r.u64()};
    f.pose.x = r.f64();
    f.pose.y = r.f64();
    f.pose.z = r.f64();
    f.pose.roll = r.f64();
    f.pose.pitch = r.f64();
    f.pose.yaw = r.f64();
    const std::uint32_t n = r.u32();
    if (r.remaining() < std::size_t{n} * 16) {
      throw Error(ErrorKind::truncation, "point data cut short in " + frame_file(dir, k).string());
    }
    f.cloud.frame = log.agent.agent_id;
    f.cloud.points.resize(n);
    for (auto& p : f.cloud.points) {
      p.x = r.f32();
      p.y = r.f32();
      p.z = r.f32();
      p.intensity = r.f32();
    }
    if (r.remaining() != 0) throw Error(ErrorKind::format, "trailing bytes in " + frame_file(dir, k).string());
    log.frames.push_back(std::move(f));
  }
  if (!log.frames.empty()) {
    log.agent.pose = log.frames.front().pose;
    log.agent.stamp = log.frames.front().stamp;
  }
  return log;
}

void save_frame_logs(const fs::path& root, const std::vector<FrameLog>& logs) {
  for (const auto& log : logs) save_frame_log(root / ("agent_" + std::to_string(log.agent.agent_id)), log);
}

std::vector<FrameLog> load_frame_logs(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::io, root.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().filename().string().starts_with("agent_")) dirs.push_back(e.path());
  }
  std::vector<FrameLog> logs;
  for (const auto& d : dirs) logs.push_back(load_frame_log(d));
  std::sort(logs.begin(), logs.end(),
            [](const FrameLog& a, const FrameLog& b) { return a.agent.agent_id < b.agent.agent_id; });
  if (logs.empty()) throw Error(ErrorKind::io, "no agent_* directories under " + root.string());
  return logs;
}

FrameLog round_to_disk(FrameLog log) {
  for (auto& f : log.frames) {
    for (auto& p : f.cloud.points) {
      p.x = static_cast<float>(p.x);
      p.y = static_cast<float>(p.y);
      p.z = static_cast<float>(p.z);
      p.intensity = static_cast<float>(p.intensity);
    }
  }
  return log;
}

std::string scenario_to_json(const Scenario& sc) {
  const ScenarioConfig& c = sc.config;
  auto actor_json = [](const ActorSpec& a) {
    return json{{"cls", static_cast<int>(a.cls)}, {"length", a.length}, {"width", a.width},
                {"height", a.height}, {"x", a.x}, {"y", a.y}, {"yaw", a.yaw},
                {"vx", a.vx}, {"vy", a.vy}};
  };
  auto agent_json = [](const AgentSpec& a) {
    return json{{"id", a.id}, {"kind", kind_name(a.kind)}, {"start", pose_json(a.start)},
                {"vx", a.vx}, {"vy", a.vy}};
  };
  json j;
  j["config"] = {{"seed", c.seed}, {"agents", c.agents}, {"duration_s", c.duration_s},
                 {"rate_hz", c.rate_hz}, {"keyframe_stride", c.keyframe_stride},
                 {"start_ns", c.start_ns}, {"cars", c.cars}, {"pedestrians", c.pedestrians},
                 {"trucks", c.trucks}, {"surface_density", c.surface_density},
                 {"ground_points", c.ground_points}, {"max_range", c.max_range},
                 {"region", grid_json(c.region)}};
  j["agents"] = json::array();
  for (const auto& a : sc.agents) j["agents"].push_back(agent_json(a));
  j["actors"] = json::array();
  for (const auto& a : sc.actors) j["actors"].push_back(actor_json(a));
  return j.dump(1) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  return parsing([&] {
    const json j = json::parse(text);
    Scenario sc;
    const json& c = j.at("config");
    ScenarioConfig& cfg = sc.config;
    cfg.seed = c.at("seed");
    cfg.agents = c.at("agents");
    cfg.duration_s = c.at("duration_s");
    cfg.rate_hz = c.at("rate_hz");
    cfg.keyframe_stride = c.at("keyframe_stride");
    cfg.start_ns = c.at("start_ns");
    cfg.cars = c.at("cars");
    cfg.pedestrians = c.at("pedestrians");
    cfg.trucks = c.at("trucks");
    cfg.surface_density = c.at("surface_density");
    cfg.ground_points = c.at("ground_points");
    cfg.max_range = c.at("max_range");
    cfg.region = grid_from(c.at("region"));
    for (const auto& a : j.at("agents")) {
      AgentSpec s;
      s.id = a.at("id");
      s.kind = parse_kind(a.at("kind"));
      s.start = pose_from(a.at("start"));
      s.vx = a.at("vx");
      s.vy = a.at("vy");
      sc.agents.push_back(s);
    }
    for (const auto& a : j.at("actors")) {
      ActorSpec s;
      const int cls = a.at("cls");
      if (cls < 0 || cls > 2) throw Error(ErrorKind::format, "bad object class");
      s.cls = static_cast<ObjectClass>(cls);
      s.length = a.at("length");
      s.width = a.at("width");
      s.height = a.at("height");
      s.x = a.at("x");
      s.y = a.at("y");
      s.yaw = a.at("yaw");
      s.vx = a.at("vx");
      s.vy = a.at("vy");
      sc.actors.push_back(s);
    }
    cfg.agent_specs = sc.agents;
    cfg.actors = sc.actors;
    return sc;
  });
}

std::string record_to_json(const std::vector<RunRecord>& records) {
  json out = json::array();
  for (const auto& r : records) {
    const PipelineConfig& c = r.config;
    json cfg = {{"mode", to_string(c.mode)},
                {"ratio", c.ratio},
                {"elem", static_cast<int>(c.elem)},
                {"projection_seed", c.projection_seed},
                {"window_ns", c.window.ns},
                {"fusion_delay_ns", c.fusion_delay.ns},
                {"encoder_profile", c.encoder_profile},
                {"decoder_profile", c.decoder_profile},
                {"egos", c.egos},
                {"detector", {{"objectness_thr", c.detector.objectness_thr},
                              {"iou_thr", c.detector.iou_thr},
                              {"min_cells", c.detector.min_cells}}},
                {"grid", grid_json(c.grid)},
                {"exec", c.exec == Exec::serial ? "serial" : "parallel"}};
    json link = {{"a_ms", num(r.link.a_ms)},
                 {"b_bytes_per_ms", num(r.link.b_bytes_per_ms)},
                 {"jitter_std_ms", r.link.jitter_std_ms},
                 {"drop_prob", r.link.drop_prob},
                 {"seed", r.link.seed}};
    json frames = json::array();
    for (const auto& f : r.frames) {
      json boxes = json::array();
      for (const auto& b : f.detections.boxes) boxes.push_back(box_json(b));
      json msgs = json::array();
      for (const auto& m : f.messages) {
        msgs.push_back({{"sender", m.sender}, {"kind", static_cast<int>(m.kind)},
                        {"bytes", m.bytes}, {"encoder", stages_json(m.encoder)},
                        {"transport_ns", m.transport.ns}, {"decoder", stages_json(m.decoder)}});
      }
      frames.push_back({{"stamp", f.stamp.ns}, {"boxes", boxes}, {"messages", msgs}});
    }
    out.push_back({{"ego_id", r.ego_id}, {"config", cfg}, {"link", link}, {"frames", frames}});
  }
  return out.dump(1) + "\n";
}

std::vector<RunRecord> records_from_json(const std::string& text) {
  return parsing([&] {
    std::vector<RunRecord> records;
    for (const auto& jr : json::parse(text)) {
      RunRecord r;
      r.ego_id = jr.at("ego_id");
      const json& c = jr.at("config");
      r.config.mode = parse_fusion_mode(c.at("mode").get<std::string>());
      r.config.ratio = c.at("ratio");
      r.config.elem = static_cast<ElemType>(c.at("elem").get<int>());
      r.config.projection_seed = c.at("projection_seed");
      r.config.window = Duration{c.at("window_ns")};
      r.config.fusion_delay = Duration{c.at("fusion_delay_ns")};
      r.config.encoder_profile = c.at("encoder_profile");
      r.config.decoder_profile = c.at("decoder_profile");
      r.config.egos = c.at("egos").get<std::vector<std::uint32_t>>();
      r.config.detector.objectness_thr = c.at("detector").at("objectness_thr");
      r.config.detector.iou_thr = c.at("detector").at("iou_thr");
      r.config.detector.min_cells = c.at("detector").at("min_cells");
      r.config.grid = grid_from(c.at("grid"));
      r.config.exec = c.at("exec") == "serial" ? Exec::serial : Exec::parallel;
      const json& l = jr.at("link");
      r.link.a_ms = num(l.at("a_ms"));
      r.link.b_bytes_per_ms = num(l.at("b_bytes_per_ms"));
      r.link.jitter_std_ms = l.at("jitter_std_ms");
      r.link.drop_prob = l.at("drop_prob");
      r.link.seed = l.at("seed");
      for (const auto& jf : jr.at("frames")) {
        FrameOutput f;
        f.stamp = Timestamp{jf.at("stamp")};
        f.detections.stamp = f.stamp;
        f.detections.agent_id = r.ego_id;
        for (const auto& b : jf.at("boxes")) f.detections.boxes.push_back(box_from(b));
        for (const auto& m : jf.at("messages")) {
          MessageLatency lat;
          lat.sender = m.at("sender");
          lat.kind = static_cast<MsgType>(m.at("kind").get<int>());
          lat.bytes = m.at("bytes");
          lat.encoder = stages_from(m.at("encoder"));
          lat.transport = Duration{m.at("transport_ns")};
          lat.decoder = stages_from(m.at("decoder"));
          f.messages.push_back(lat);
        }
        r.frames.push_back(std::move(f));
      }
      records.push_back(std::move(r));
    }
    return records;
  });
}

}  // namespace v2xl
