#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "v2xl/core.hpp"
#include "v2xl/kernels.hpp"

namespace v2xl {

// BEV extent and feature depth. Rows run along x, columns along y.
struct GridSpec {
  double x_min = -100.0, x_max = 100.0;
  double y_min = -40.0, y_max = 40.0;
  double voxel = 0.4;
  std::uint32_t channels = 64;
  std::uint64_t lift_seed = 0x5eed'b0a7;

  // Throws shape when the extent is not a whole number of voxels or C < 4.
  void validate() const;
  std::size_t rows() const;  // H
  std::size_t cols() const;  // W
  std::size_t cells() const { return rows() * cols(); }
  std::size_t elements() const { return cells() * channels; }

  // Same geometry, different depth.
  GridSpec with_channels(std::uint32_t c) const {
    GridSpec s = *this;
    s.channels = c;
    return s;
  }

  // Cell containing (x, y), or -1 when outside [min, max).
  std::ptrdiff_t cell_of(double x, double y) const;
  std::array<double, 2> cell_center(std::size_t row, std::size_t col) const;

  kernels::GridGeometry geometry() const;

  bool operator==(const GridSpec&) const = default;
};

// H x W x C float grid, row-major with channels innermost.
struct BEVFeatureGrid {
  GridSpec spec;
  Timestamp stamp;
  std::uint32_t agent_id = 0;
  Pose ego_frame_pose;
  std::vector<float> data;

  static BEVFeatureGrid zeros(const GridSpec& spec);

  float& at(std::size_t row, std::size_t col, std::size_t c) {
    return data[(row * spec.cols() + col) * spec.channels + c];
  }
  float at(std::size_t row, std::size_t col, std::size_t c) const {
    return data[(row * spec.cols() + col) * spec.channels + c];
  }
  std::span<const float> cell(std::size_t index) const {
    return {data.data() + index * spec.channels, spec.channels};
  }
};

// Raw (pre-normalization) statistics of one occupied pillar.
struct PillarStats {
  std::size_t cell = 0;
  std::uint32_t count = 0;
  double max_z = 0;
  double mean_z = 0;
  double mean_intensity = 0;
};

// Occupied pillars sorted by cell index. Points outside the extent or with
// non-finite coordinates are ignored; z is not clipped.
std::vector<PillarStats> pillar_statistics(const PointCloud& cloud, const GridSpec& spec,
                                           Exec exec = Exec::parallel);

// Channel-lift weights in [0.5, 1.5], one per channel, drawn from lift_seed.
std::vector<double> lift_weights(const GridSpec& spec);

// Voxelizes an ego-frame cloud into the BEV feature grid. Each of the four
// pillar statistics (count, max z, mean z, mean intensity) is min-max
// normalized over the occupied pillars; channel c carries statistic c % 4
// scaled by its lift weight. Empty pillars are zero.
BEVFeatureGrid pillarize(const PointCloud& cloud, const GridSpec& spec,
                         const FramePose& ego, Exec exec = Exec::parallel);

}  // namespace v2xl
