#pragma once

// Transmission encoder/decoder: channel compression, the stage-cost model and
// the little-endian wire format shared by every message kind.
//
// Header (26 bytes): magic "V2XL" | version u8 | msg_type u8 | agent_id u32 |
//                    seq u32 | stamp_ns u64 | body_len u32
// Bodies:
//   metadata      6 x f64 pose (x, y, z, roll, pitch, yaw)
//   intermediate  h u16 | w u16 | c_orig u16 | ratio u16 | elem_type u8 |
//                 quant_scale f32 | quant_offset f32 | projection_seed u64 |
//                 payload (h * w * c_orig / ratio elements)
//   detections    count u32, then per box: class u8 | score f32 |
//                 cx, cy, cz f32 | l, w, h f32 | yaw f32
//   pointcloud    count u32, then per point x, y, z, intensity f32
//   ping / pong   echo_stamp u64

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "v2xl/core.hpp"
#include "v2xl/kernels.hpp"
#include "v2xl/pillar.hpp"

namespace v2xl {

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderBytes = 26;
inline constexpr std::size_t kFeatureHeaderBytes = 25;
inline constexpr std::size_t kBoxBytes = 33;
inline constexpr std::size_t kPointBytes = 16;

enum class ElemType : std::uint8_t { f32 = 0, u8_quant = 1 };

std::size_t element_size(ElemType t);

struct CompressedFeature {
  std::uint16_t h = 0, w = 0;
  std::uint16_t c_orig = 0;
  std::uint16_t ratio = 1;
  ElemType elem_type = ElemType::f32;
  float quant_scale = 0;
  float quant_offset = 0;
  std::uint64_t projection_seed = 0;
  // Little-endian encoded elements, exactly h * w * (c_orig / ratio) of them.
  std::vector<std::uint8_t> payload;

  std::size_t reduced_channels() const { return c_orig / ratio; }
  std::size_t element_count() const {
    return std::size_t{h} * w * reduced_channels();
  }
  // Dequantized payload values (projected domain).
  std::vector<float> values() const;

  bool operator==(const CompressedFeature&) const = default;
};

// Orthonormal C x (C / ratio) basis, row-major, from a seeded Gaussian
// matrix orthonormalized by column. Column 0 is the constant 1/sqrt(C).
// Cached per (C, k, seed).
std::shared_ptr<const std::vector<double>> projection_basis(std::size_t channels,
                                                             std::size_t k,
                                                             std::uint64_t seed);

// Throws ratio when r is not a power of two dividing C.
void check_ratio(std::size_t channels, std::size_t ratio);

CompressedFeature compress(const BEVFeatureGrid& grid, std::size_t ratio,
                           std::uint64_t seed, ElemType elem = ElemType::f32,
                           Exec exec = Exec::parallel);

// Restores c_orig channels on `spec` (whose shape must match the feature).
BEVFeatureGrid decompress(const CompressedFeature& cf, const GridSpec& spec,
                          Exec exec = Exec::parallel);
// Same, on a grid centered at the origin with the default voxel.
BEVFeatureGrid decompress(const CompressedFeature& cf, Exec exec = Exec::parallel);

enum class MsgType : std::uint8_t {
  metadata = 0,
  intermediate = 1,
  detections = 2,
  pointcloud = 3,
  ping = 4,
  pong = 5,
};

const char* to_string(MsgType t) noexcept;

struct MetadataBody {
  Pose pose;
  bool operator==(const MetadataBody&) const = default;
};
struct DetectionsBody {
  std::vector<Box3D> boxes;
  bool operator==(const DetectionsBody&) const = default;
};
struct PointCloudBody {
  std::vector<Point> points;
  bool operator==(const PointCloudBody&) const = default;
};
struct PingBody {
  Timestamp echo_stamp;
  bool operator==(const PingBody&) const = default;
};
struct PongBody {
  Timestamp echo_stamp;
  bool operator==(const PongBody&) const = default;
};

// Alternative order matches MsgType.
using MessageBody = std::variant<MetadataBody, CompressedFeature, DetectionsBody,
                                 PointCloudBody, PingBody, PongBody>;

struct WireMessage {
  std::uint32_t agent_id = 0;
  std::uint32_t seq = 0;
  Timestamp stamp;
  MessageBody body;

  MsgType type() const { return static_cast<MsgType>(body.index()); }
  bool operator==(const WireMessage&) const = default;
};

std::size_t body_size(const MessageBody& body);
std::size_t serialized_size(const WireMessage& msg);

std::vector<std::uint8_t> serialize(const WireMessage& msg);
WireMessage deserialize(std::span<const std::uint8_t> bytes);

// Serialized size of an intermediate message for this grid, computed without
// building it.
std::size_t message_size(const GridSpec& spec, std::size_t ratio, ElemType elem);

// Time charged by the encoder or decoder, per stage.
struct StageTimings {
  Duration compression;
  Duration device_transfer;
  Duration serialization;
  Duration packaging;

  Duration total() const {
    return Duration{compression.ns + device_transfer.ns + serialization.ns + packaging.ns};
  }
  bool operator==(const StageTimings&) const = default;
};

// Built-ins: "paper-encoder", "paper-decoder", "zero". Anything else must be
// four comma-separated millisecond values. Throws config otherwise.
StageTimings stage_timings(std::string_view profile);

}  // namespace v2xl
