#include "v2xl/replay.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <tuple>

#include "v2xl/bank.hpp"
#include "v2xl/pillar.hpp"

namespace v2xl {

const char* to_string(FusionMode m) noexcept {
  switch (m) {
    case FusionMode::none: return "none";
    case FusionMode::late: return "late";
    case FusionMode::early: return "early";
    case FusionMode::intermediate_max: return "intermediate-max";
    case FusionMode::intermediate_attention: return "intermediate-attention";
  }
  return "?";
}

FusionMode parse_fusion_mode(std::string_view name) {
  for (auto m : {FusionMode::none, FusionMode::late, FusionMode::early,
                 FusionMode::intermediate_max, FusionMode::intermediate_attention}) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorKind::config, "unknown fusion mode '" + std::string(name) + "'");
}

void PipelineConfig::validate(Duration frame_period) const {
  grid.validate();
  if (egos.empty()) throw Error(ErrorKind::config, "no ego agent configured");
  if (window.ns < 0) throw Error(ErrorKind::config, "negative freshness window");
  if (fusion_delay.ns < 0 || fusion_delay >= frame_period) {
    throw Error(ErrorKind::config, "fusion delay must lie in [0, frame period)");
  }
  if (mode == FusionMode::intermediate_max || mode == FusionMode::intermediate_attention) {
    try {
      check_ratio(grid.channels, ratio);
    } catch (const Error& e) {
      throw Error(ErrorKind::config, e.what());
    }
  }
  (void)stage_timings(encoder_profile);
  (void)stage_timings(decoder_profile);
}

PipelineConfig PipelineConfig::online(FusionMode mode) {
  PipelineConfig c;
  c.mode = mode;
  return c;
}

PipelineConfig PipelineConfig::offline(FusionMode mode) {
  PipelineConfig c;
  c.mode = mode;
  c.window = Duration::infinite();
  c.encoder_profile = "zero";
  c.decoder_profile = "zero";
  return c;
}

namespace {

MsgType message_kind(FusionMode m) {
  switch (m) {
    case FusionMode::late: return MsgType::detections;
    case FusionMode::early: return MsgType::pointcloud;
    default: return MsgType::intermediate;
  }
}

struct Agent {
  std::uint32_t id = 0;
  const FrameLog* log = nullptr;
  FeatureBank bank;
  std::uint32_t seq = 0;
  // (sender, kind, stamp) -> how the message got here
  std::map<std::tuple<std::uint32_t, MsgType, std::uint64_t>, MessageLatency> arrivals;
};

class Replayer {
 public:
  Replayer(const std::vector<FrameLog>& logs, const PipelineConfig& cfg, const LinkModel& link)
      : cfg_(cfg), net_(link) {
    encoder_ = stage_timings(cfg.encoder_profile);
    decoder_ = stage_timings(cfg.decoder_profile);
    net_.set_stage_timings(MsgType::intermediate, encoder_, decoder_);
    for (const auto& log : logs) {
      auto a = std::make_unique<Agent>();
      a->id = log.agent.agent_id;
      a->log = &log;
      net_.add_node(a->id);
      Agent* raw = a.get();
      net_.set_handler(a->id, [this, raw](const Delivery& d) { receive(*raw, d); });
      agents_.emplace(a->id, std::move(a));
    }
    for (auto e : cfg.egos) {
      if (!agents_.contains(e)) throw Error(ErrorKind::config, "ego " + std::to_string(e) + " has no log");
      records_.push_back(RunRecord{e, cfg, link, {}});
    }
  }

  std::vector<RunRecord> run(std::size_t frames) {
    for (std::size_t k = 0; k < frames; ++k) {
      const Timestamp t = agents_.begin()->second->log->frames[k].stamp;
      net_.schedule(t, [this, k] { broadcast_metadata(k); });
    }
    net_.run_all();
    return std::move(records_);
  }

 private:
  const LogFrame& frame(const Agent& a, std::size_t k) const { return a.log->frames[k]; }

  void send(Agent& from, std::uint32_t to, Timestamp stamp, MessageBody body) {
    WireMessage msg{from.id, from.seq++, stamp, std::move(body)};
    net_.send(from.id, to, msg);
  }

  void receive(Agent& self, const Delivery& d) {
    const WireMessage msg = deserialize(*d.bytes);
    const MsgType kind = msg.type();
    MessageLatency lat;
    lat.sender = msg.agent_id;
    lat.kind = kind;
    lat.bytes = d.bytes->size();
    Duration stages{};
    if (kind == MsgType::intermediate) {
      lat.encoder = encoder_;
      lat.decoder = decoder_;
      stages = Duration{encoder_.total().ns + decoder_.total().ns};
    }
    lat.transport = Duration{(d.delivered - d.sent).ns - stages.ns};
    self.arrivals[{msg.agent_id, kind, msg.stamp.ns}] = lat;

    BankPayload payload;
    switch (kind) {
      case MsgType::metadata:
        payload = std::get<MetadataBody>(msg.body).pose;
        break;
      case MsgType::detections: {
        auto set = std::make_shared<DetectionSet>();
        set->stamp = msg.stamp;
        set->agent_id = msg.agent_id;
        set->boxes = std::get<DetectionsBody>(msg.body).boxes;
        payload = std::shared_ptr<const DetectionSet>(std::move(set));
        break;
      }
      case MsgType::pointcloud: {
        // Collaborators send clouds already projected into our frame.
        auto cloud = std::make_shared<PointCloud>();
        cloud->frame = self.id;
        cloud->points = std::get<PointCloudBody>(msg.body).points;
        payload = std::shared_ptr<const PointCloud>(std::move(cloud));
        break;
      }
      case MsgType::intermediate: {
        const auto& cf = std::get<CompressedFeature>(msg.body);
        auto grid = std::make_shared<BEVFeatureGrid>(decompress(cf, cfg_.grid, cfg_.exec));
        grid->stamp = msg.stamp;
        grid->agent_id = msg.agent_id;
        payload = std::shared_ptr<const BEVFeatureGrid>(std::move(grid));
        break;
      }
      default:
        throw Error(ErrorKind::protocol, std::string("unexpected ") + to_string(kind) + " message");
    }
    self.bank.insert(msg.agent_id, kind, msg.stamp, std::move(payload));
  }

  void broadcast_metadata(std::size_t k) {
    for (auto& [id, a] : agents_) {
      const LogFrame& f = frame(*a, k);
      for (const auto& [other, unused] : agents_) {
        (void)unused;
        if (other != id) send(*a, other, f.stamp, MetadataBody{f.pose});
      }
    }
    const Timestamp t = net_.now();
    // Same instant, later sequence: metadata delivered with zero delay is
    // already banked when collaborators look for the ego pose.
    net_.schedule(t, [this, k] { share(k); });
    net_.schedule(t + cfg_.fusion_delay, [this, k] { fuse(k); });
  }

  void share(std::size_t k) {
    if (cfg_.mode == FusionMode::none) return;
    for (auto e : cfg_.egos) {
      for (auto& [id, a] : agents_) {
        if (id == e) continue;
        const LogFrame& f = frame(*a, k);
        const auto known = a->bank.query_latest(e, MsgType::metadata, net_.local_time(id),
                                                Duration::infinite());
        if (!known) continue;  // no ego pose yet
        const FramePose ego{e, std::get<Pose>(known->payload)};
        const PointCloud projected = transform_points(f.cloud, FramePose{id, f.pose}, ego);
        switch (cfg_.mode) {
          case FusionMode::early:
            send(*a, e, f.stamp, PointCloudBody{projected.points});
            break;
          case FusionMode::late: {
            BEVFeatureGrid grid = pillarize(projected, cfg_.grid, ego, cfg_.exec);
            grid.stamp = f.stamp;
            send(*a, e, f.stamp, DetectionsBody{detect(grid, cfg_.detector).boxes});
            break;
          }
          default: {
            BEVFeatureGrid grid = pillarize(projected, cfg_.grid, ego, cfg_.exec);
            grid.stamp = f.stamp;
            send(*a, e, f.stamp, compress(grid, cfg_.ratio, cfg_.projection_seed, cfg_.elem, cfg_.exec));
            break;
          }
        }
      }
    }
  }

  void fuse(std::size_t k) {
    for (auto& record : records_) {
      Agent& ego = *agents_.at(record.ego_id);
      const LogFrame& f = frame(ego, k);
      const FramePose pose{ego.id, f.pose};
      const Timestamp now = net_.local_time(ego.id);

      FrameOutput out;
      out.stamp = f.stamp;
      std::map<std::uint32_t, FeatureBank::Entry> incoming;
      if (cfg_.mode != FusionMode::none) {
        incoming = ego.bank.query_all_latest(message_kind(cfg_.mode), now, cfg_.window);
      }
      for (const auto& [sender, entry] : incoming) {
        auto it = ego.arrivals.find({sender, message_kind(cfg_.mode), entry.stamp.ns});
        if (it != ego.arrivals.end()) out.messages.push_back(it->second);
      }

      auto own_grid = [&](const PointCloud& cloud) {
        BEVFeatureGrid g = pillarize(cloud, cfg_.grid, pose, cfg_.exec);
        g.stamp = f.stamp;
        return g;
      };

      switch (cfg_.mode) {
        case FusionMode::none:
          out.detections = detect(own_grid(f.cloud), cfg_.detector);
          break;
        case FusionMode::late: {
          std::vector<DetectionSet> sets{detect(own_grid(f.cloud), cfg_.detector)};
          for (const auto& [sender, entry] : incoming) {
            sets.push_back(*std::get<std::shared_ptr<const DetectionSet>>(entry.payload));
          }
          out.detections = late_fuse(sets, cfg_.detector.iou_thr);
          break;
        }
        case FusionMode::early: {
          std::vector<CollaboratorCloud> others;
          for (const auto& [sender, entry] : incoming) {
            const auto& cloud = *std::get<std::shared_ptr<const PointCloud>>(entry.payload);
            others.push_back(CollaboratorCloud{cloud, pose});
          }
          out.detections = detect(own_grid(early_fuse(f.cloud, others, f.pose)), cfg_.detector);
          break;
        }
        case FusionMode::intermediate_max:
        case FusionMode::intermediate_attention: {
          std::vector<BEVFeatureGrid> grids{own_grid(f.cloud)};
          for (const auto& [sender, entry] : incoming) {
            grids.push_back(*std::get<std::shared_ptr<const BEVFeatureGrid>>(entry.payload));
          }
          BEVFeatureGrid fused;
          if (grids.size() == 1) {
            fused = std::move(grids[0]);
          } else if (cfg_.mode == FusionMode::intermediate_max) {
            fused = fuse_max(grids, cfg_.exec);
          } else {
            fused = fuse_attention(grids, cfg_.exec);
          }
          fused.stamp = f.stamp;
          fused.agent_id = ego.id;
          out.detections = detect(fused, cfg_.detector);
          break;
        }
      }
      out.detections.stamp = f.stamp;
      out.detections.agent_id = ego.id;
      record.frames.push_back(std::move(out));
    }
  }

  PipelineConfig cfg_;
  Network net_;
  StageTimings encoder_, decoder_;
  std::map<std::uint32_t, std::unique_ptr<Agent>> agents_;
  std::vector<RunRecord> records_;
};

}  // namespace

std::vector<RunRecord> replay(const std::vector<FrameLog>& logs, const Scenario& scenario,
                              const PipelineConfig& cfg, const LinkModel& link) {
  link.validate();
  if (logs.empty()) throw Error(ErrorKind::config, "no frame logs to replay");
  const std::size_t frames = logs.front().frames.size();
  for (const auto& log : logs) {
    if (log.frames.size() != frames) throw Error(ErrorKind::config, "frame logs differ in length");
    for (std::size_t k = 0; k < frames; ++k) {
      if (log.frames[k].stamp != logs.front().frames[k].stamp) {
        throw Error(ErrorKind::config, "frame logs are not time-synchronized");
      }
    }
  }
  cfg.validate(scenario.period());
  Replayer r(logs, cfg, link);
  return r.run(frames);
}

}  // namespace v2xl
