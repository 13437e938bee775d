#pragma once

// Virtual-clock replay of per-agent frame logs through the cooperative
// perception pipeline.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "v2xl/fusion.hpp"
#include "v2xl/netsim.hpp"
#include "v2xl/scenario.hpp"
#include "v2xl/txcodec.hpp"

namespace v2xl {

enum class FusionMode : std::uint8_t { none, late, early, intermediate_max, intermediate_attention };

const char* to_string(FusionMode m) noexcept;
FusionMode parse_fusion_mode(std::string_view name);  // throws config

struct PipelineConfig {
  FusionMode mode = FusionMode::none;
  std::size_t ratio = 32;
  ElemType elem = ElemType::f32;
  std::uint64_t projection_seed = 0x0c0ffee;
  Duration window = Duration::from_ms(100);  // freshness window of the feature bank
  // The ego fuses this long after each frame stamp; must be shorter than
  // the frame period so a frame never sees the next frame's messages.
  Duration fusion_delay = Duration::from_ms(80);
  std::string encoder_profile = "paper-encoder";
  std::string decoder_profile = "paper-decoder";
  std::vector<std::uint32_t> egos{0};
  DetectorConfig detector;
  GridSpec grid;
  Exec exec = Exec::parallel;

  void validate(Duration frame_period) const;

  // paper-wifi with a 100 ms window and measured stage costs
  static PipelineConfig online(FusionMode mode);
  // ideal link, unbounded window, free stages
  static PipelineConfig offline(FusionMode mode);
};

struct MessageLatency {
  std::uint32_t sender = 0;
  MsgType kind = MsgType::metadata;
  std::size_t bytes = 0;
  StageTimings encoder;
  Duration transport;
  StageTimings decoder;

  bool operator==(const MessageLatency&) const = default;
};

struct FrameOutput {
  Timestamp stamp;  // sensor stamp of the ego frame
  DetectionSet detections;
  std::vector<MessageLatency> messages;  // collaborator messages that were fused

  bool operator==(const FrameOutput& o) const {
    return stamp == o.stamp && detections.stamp == o.detections.stamp &&
           detections.agent_id == o.detections.agent_id &&
           detections.boxes == o.detections.boxes && messages == o.messages;
  }
};

struct RunRecord {
  std::uint32_t ego_id = 0;
  PipelineConfig config;
  LinkModel link;
  std::vector<FrameOutput> frames;
};

// Runs every frame of the logs and returns one record per configured ego.
std::vector<RunRecord> replay(const std::vector<FrameLog>& logs, const Scenario& scenario,
                              const PipelineConfig& cfg, const LinkModel& link);

}  // namespace v2xl
