// Command-line front end: scenario generation, replay, evaluation and the
// link / codec benchmarks.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "v2xl/evaluation.hpp"
#include "v2xl/logio.hpp"
#include "v2xl/netsim.hpp"
#include "v2xl/replay.hpp"
#include "v2xl/scenario.hpp"
#include "v2xl/txcodec.hpp"

namespace fs = std::filesystem;
using namespace v2xl;

namespace {

struct GenArgs {
  ScenarioConfig cfg;
  std::string out = "scenario";
};

struct ReplayArgs {
  std::string logs;
  std::string scenario;
  std::string mode = "none";
  std::size_t ratio = 32;
  std::string link = "paper-wifi";
  std::string out = "record.json";
  std::string elem = "f32";
  double window_ms = 100.0;
  double fusion_delay_ms = 80.0;
  std::string encoder = "paper-encoder";
  std::string decoder = "paper-decoder";
  std::vector<std::uint32_t> egos{0};
  double objectness = DetectorConfig{}.objectness_thr;
  std::size_t channels = GridSpec{}.channels;
  bool offline = false;
  bool serial = false;
};

struct EvalArgs {
  std::string record;
  std::string scenario;
  std::string out = "report";
  double tolerance = 0.5;
};

struct LatencyArgs {
  std::string link = "paper-wifi";
  std::string kind = "intermediate";
  std::size_t n = 100;
  std::size_t ratio = 32;
};

struct CodecArgs {
  std::vector<std::size_t> ratios{1, 8, 32, 64};
  std::string elem = "f32";
  std::string link = "paper-wifi";
};

ElemType parse_elem(const std::string& s) {
  if (s == "f32") return ElemType::f32;
  if (s == "u8") return ElemType::u8_quant;
  throw Error(ErrorKind::config, "element type must be f32 or u8");
}

MsgType parse_kind(const std::string& s) {
  for (auto k : {MsgType::metadata, MsgType::intermediate, MsgType::detections, MsgType::pointcloud,
                 MsgType::ping, MsgType::pong}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorKind::config, "unknown message kind '" + s + "'");
}

// A directory holding scenario.json, or the file itself.
Scenario load_scenario(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "scenario.json";
  return scenario_from_json(read_text(p));
}

int run_gen(const GenArgs& a) {
  const GeneratedScenario g = generate_scenario(a.cfg);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "scenario.json", scenario_to_json(g.scenario));
  save_frame_logs(out, g.logs);
  std::size_t points = 0;
  for (const auto& log : g.logs)
    for (const auto& f : log.frames) points += f.cloud.points.size();
  std::printf("wrote %zu agents x %zu frames (%zu points, %zu actors) to %s\n", g.logs.size(),
              g.scenario.frame_count(), points, g.scenario.actors.size(), out.string().c_str());
  return 0;
}

int run_replay(const ReplayArgs& a) {
  const auto logs = load_frame_logs(a.logs);
  const Scenario sc = load_scenario(a.scenario.empty() ? a.logs : a.scenario);
  const FusionMode mode = parse_fusion_mode(a.mode);
  PipelineConfig cfg = a.offline ? PipelineConfig::offline(mode) : PipelineConfig::online(mode);
  cfg.ratio = a.ratio;
  cfg.elem = parse_elem(a.elem);
  cfg.egos = a.egos;
  cfg.detector.objectness_thr = a.objectness;
  cfg.grid.channels = a.channels;
  cfg.exec = a.serial ? Exec::serial : Exec::parallel;
  cfg.fusion_delay = Duration::from_ms(a.fusion_delay_ms);
  if (!a.offline) {
    cfg.window = a.window_ms < 0 ? Duration::infinite() : Duration::from_ms(a.window_ms);
    cfg.encoder_profile = a.encoder;
    cfg.decoder_profile = a.decoder;
  }
  const LinkModel link = a.offline ? LinkModel::ideal() : load_link_profile(a.link);
  const auto records = replay(logs, sc, cfg, link);
  write_text(a.out, record_to_json(records));
  for (const auto& r : records) {
    std::size_t boxes = 0, msgs = 0;
    for (const auto& f : r.frames) {
      boxes += f.detections.boxes.size();
      msgs += f.messages.size();
    }
    std::printf("ego %u: %zu frames, %zu boxes, %zu collaborator messages fused\n", r.ego_id,
                r.frames.size(), boxes, msgs);
  }
  return 0;
}

int run_eval(const EvalArgs& a) {
  const auto records = records_from_json(read_text(a.record));
  const Scenario sc = load_scenario(a.scenario);
  const fs::path out(a.out);
  for (const auto& r : records) {
    const Report rep = evaluate(r, sc, a.tolerance);
    const fs::path dir = records.size() == 1 ? out : out / ("ego_" + std::to_string(r.ego_id));
    write_text(dir / "report.csv", rep.ap_csv());
    write_text(dir / "latency.csv", rep.latency_csv());
    write_text(dir / "sizes.csv", rep.sizes_csv());
    write_text(dir / "report.txt", rep.text());
    std::printf("ego %u (%s)\n%s\n", r.ego_id, to_string(r.config.mode), rep.text().c_str());
  }
  return 0;
}

int run_latency(const LatencyArgs& a) {
  Network net(load_link_profile(a.link));
  net.add_node(0);
  net.add_node(1);
  const WireMessage msg = representative_message(parse_kind(a.kind), a.ratio);
  const LatencyStats s = measure_one_way(net, 0, 1, msg, a.n);
  const LinkModel& link = net.link(0, 1);
  std::printf("kind %s  bytes %zu  sent %zu  received %zu\n", a.kind.c_str(), s.message_bytes, s.sent,
              s.received);
  std::printf("one-way ms: mean %.3f  std %.3f  min %.3f  max %.3f  (model %.3f)\n", s.mean_ms, s.std_ms,
              s.min_ms, s.max_ms, link.predict_ms(static_cast<double>(s.message_bytes)));
  return 0;
}

int run_codec(const CodecArgs& a) {
  const GridSpec spec;
  const ElemType elem = parse_elem(a.elem);
  const LinkModel link = load_link_profile(a.link);
  // One real frame so timings reflect populated features.
  ScenarioConfig sc;
  sc.duration_s = 0.1;
  sc.agents = 1;
  const auto g = generate_scenario(sc);
  const auto& f = g.logs[0].frames[0];
  BEVFeatureGrid grid = pillarize(f.cloud, spec, FramePose{0, f.pose});

  std::printf("%-6s %14s %12s %14s %12s %12s\n", "ratio", "bytes", "size", "link_ms", "encode_ms",
              "decode_ms");
  for (std::size_t r : a.ratios) {
    const auto t0 = std::chrono::steady_clock::now();
    CompressedFeature cf = compress(grid, r, 0x0c0ffee, elem);
    const std::size_t bytes = serialize(WireMessage{0, 0, f.stamp, cf}).size();
    const auto t1 = std::chrono::steady_clock::now();
    (void)decompress(cf, spec);
    const auto t2 = std::chrono::steady_clock::now();
    if (bytes != message_size(spec, r, elem)) {
      throw Error(ErrorKind::size, "serialized size disagrees with message_size");
    }
    const double kib = static_cast<double>(bytes) / 1024.0;
    char size[32];
    if (kib >= 1024.0) std::snprintf(size, sizeof size, "%.1f MB", kib / 1024.0);
    else std::snprintf(size, sizeof size, "%.1f KB", kib);
    std::printf("%-6zu %14zu %12s %14.1f %12.2f %12.2f\n", r, bytes, size,
                link.predict_ms(static_cast<double>(bytes)),
                std::chrono::duration<double, std::milli>(t1 - t0).count(),
                std::chrono::duration<double, std::milli>(t2 - t1).count());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"v2xl: online cooperative perception replay toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a key=value file");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic scenario and per-agent frame logs");
  g->add_option("--seed", gen.cfg.seed, "scenario seed");
  g->add_option("--agents", gen.cfg.agents, "number of agents")->check(CLI::PositiveNumber);
  g->add_option("--duration", gen.cfg.duration_s, "seconds");
  g->add_option("--rate", gen.cfg.rate_hz, "frame rate, Hz");
  g->add_option("--cars", gen.cfg.cars);
  g->add_option("--pedestrians", gen.cfg.pedestrians);
  g->add_option("--trucks", gen.cfg.trucks);
  g->add_option("--keyframe-stride", gen.cfg.keyframe_stride);
  g->add_option("--out", gen.out, "output directory");

  ReplayArgs rep;
  auto* r = app.add_subcommand("replay", "replay frame logs through the fusion pipeline");
  r->add_option("--logs", rep.logs, "directory written by gen")->required();
  r->add_option("--scenario", rep.scenario, "scenario.json (defaults to the one in --logs)");
  r->add_option("--mode", rep.mode, "none|late|early|intermediate-max|intermediate-attention");
  r->add_option("--ratio", rep.ratio, "channel compression ratio");
  r->add_option("--link", rep.link, "paper-wifi, ideal, or a profile file");
  r->add_option("--out", rep.out, "run record (JSON)");
  r->add_option("--elem", rep.elem, "f32|u8");
  r->add_option("--window-ms", rep.window_ms, "feature bank freshness window, negative = unbounded");
  r->add_option("--fusion-delay-ms", rep.fusion_delay_ms, "ego fuses this long after each frame");
  r->add_option("--encoder", rep.encoder, "encoder stage profile");
  r->add_option("--decoder", rep.decoder, "decoder stage profile");
  r->add_option("--ego", rep.egos, "ego agent ids");
  r->add_option("--objectness", rep.objectness, "detector objectness threshold");
  r->add_option("--channels", rep.channels, "feature channels");
  r->add_flag("--offline", rep.offline, "ideal link, unbounded window, free stages");
  r->add_flag("--serial", rep.serial, "use the serial kernels");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score a run record against scenario ground truth");
  e->add_option("--record", ev.record)->required();
  e->add_option("--scenario", ev.scenario, "scenario.json or its directory")->required();
  e->add_option("--out", ev.out, "report directory");
  e->add_option("--tolerance", ev.tolerance, "alignment tolerance, fraction of a frame period");

  LatencyArgs lat;
  auto* l = app.add_subcommand("bench-latency", "round-trip one-way latency over a simulated link");
  l->add_option("--link", lat.link);
  l->add_option("--msg-kind", lat.kind, "detections|pointcloud|intermediate|ping");
  l->add_option("--n", lat.n, "round trips")->check(CLI::PositiveNumber);
  l->add_option("--ratio", lat.ratio, "compression ratio for intermediate messages");

  CodecArgs codec;
  auto* c = app.add_subcommand("codec-bench", "intermediate message size and latency per ratio");
  c->add_option("--ratio", codec.ratios, "ratios to sweep");
  c->add_option("--elem", codec.elem, "f32|u8");
  c->add_option("--link", codec.link);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
  }

  try {
    if (*g) return run_gen(gen);
    if (*r) return run_replay(rep);
    if (*e) return run_eval(ev);
    if (*l) return run_latency(lat);
    if (*c) return run_codec(codec);
  } catch (const Error& err) {
    std::cerr << "error (" << to_string(err.kind()) << "): " << err.what() << "\n";
    return err.exit_code();
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
