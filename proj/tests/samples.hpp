#pragma once

// Random grids and wire messages shared by the codec tests.

#include "oracles.hpp"
#include "v2xl/txcodec.hpp"

namespace samples {

using namespace v2xl;

inline GridSpec codec_spec(std::uint32_t channels = 16) {
  GridSpec s;
  s.x_min = -8;
  s.x_max = 8;
  s.y_min = -4;
  s.y_max = 4;
  s.voxel = 0.5;
  s.channels = channels;
  return s;
}

inline BEVFeatureGrid random_grid(const GridSpec& s, Rng& rng) {
  auto g = BEVFeatureGrid::zeros(s);
  for (auto& v : g.data) v = rng.bernoulli(0.3) ? static_cast<float>(rng.uniform(0, 1.5)) : 0.0f;
  return g;
}

inline double f32(double v) { return static_cast<float>(v); }

inline MessageBody random_body(MsgType kind, Rng& rng) {
  switch (kind) {
    case MsgType::metadata:
      return MetadataBody{oracle::random_pose(rng)};
    case MsgType::intermediate: {
      const GridSpec s = codec_spec(8);
      const std::size_t ratios[] = {1, 2, 4, 8};
      const auto elem = rng.bernoulli(0.5) ? ElemType::f32 : ElemType::u8_quant;
      return compress(random_grid(s, rng), ratios[rng.below(4)], rng.next_u64(), elem);
    }
    case MsgType::detections: {
      DetectionsBody d;
      const auto n = rng.below(20);
      for (std::size_t i = 0; i < n; ++i) {
        Box3D b = oracle::random_box(rng);
        b.cx = f32(b.cx);
        b.cy = f32(b.cy);
        b.cz = f32(b.cz);
        b.length = f32(b.length);
        b.width = f32(b.width);
        b.height = f32(b.height);
        b.yaw = f32(b.yaw);
        b.score = f32(b.score);
        d.boxes.push_back(b);
      }
      return d;
    }
    case MsgType::pointcloud: {
      PointCloudBody p;
      const auto n = rng.below(200);
      for (std::size_t i = 0; i < n; ++i)
        p.points.push_back({f32(rng.uniform(-90, 90)), f32(rng.uniform(-90, 90)), f32(rng.uniform(-3, 3)), f32(rng.uniform())});
      return p;
    }
    case MsgType::ping:
      return PingBody{Timestamp{rng.next_u64()}};
    case MsgType::pong:
      return PongBody{Timestamp{rng.next_u64()}};
  }
  return PingBody{};
}

}  // namespace samples
