#pragma once

// Data-parallel inner loops. Every kernel exists twice with an identical
// signature: `serial` is the straightforward reference, `omp` the OpenMP
// version used by the pipeline. Outputs are bit-identical between the two
// (no cross-thread floating-point reductions).

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace v2xl {

enum class Exec { serial, parallel };

namespace kernels {

// One in-grid point reduced to what pillar statistics need.
struct PillarEntry {
  std::uint32_t cell = 0;
  double z = 0;
  double intensity = 0;
};

struct PillarRaw {
  std::uint32_t cell = 0;
  std::uint32_t count = 0;
  double max_z = 0;
  double sum_z = 0;
  double sum_intensity = 0;
};

// 2D affine map (meters -> meters): [x', y'] = [a b; c d][x, y] + [tx, ty].
struct Affine2 {
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;
};

struct GridGeometry {
  std::size_t h = 0, w = 0, channels = 0;
  double x_min = 0, y_min = 0, voxel = 1;
};

namespace serial {

// Per-pillar sums over entries given in any order; result sorted by cell.
// Points inside a pillar are accumulated in (z, intensity) order.
std::vector<PillarRaw> reduce_pillars(std::span<const PillarEntry> entries);

// out[cell * C + c] = stats[p][c % 4] * weights[c] for each occupied cell.
void fill_channels(std::span<const std::uint32_t> cells,
                   std::span<const std::array<double, 4>> stats,
                   std::span<const double> weights, std::span<float> out);

// y = P^T x per cell; P is C x k, row-major.
void project(std::span<const float> in, std::size_t channels,
             std::span<const double> basis, std::size_t k, std::span<float> out);

// x = P y per cell.
void unproject(std::span<const float> in, std::size_t k,
               std::span<const double> basis, std::size_t channels,
               std::span<float> out);

void elementwise_max(std::span<const std::span<const float>> inputs,
                     std::span<float> out);

// Ego-row scaled dot-product attention with identity projections; input 0 is
// the ego token.
void ego_attention(std::span<const std::span<const float>> inputs,
                   std::size_t channels, std::span<float> out);

// Nearest-neighbour resample: each output cell center is mapped through
// `to_source`; cells landing outside the source grid are zero.
void warp_nearest(std::span<const float> in, const GridGeometry& geom,
                  const Affine2& to_source, std::span<float> out);

}  // namespace serial

namespace omp {

// Per-pillar sums over entries given in any order; result sorted by cell.
// Points inside a pillar are accumulated in (z, intensity) order.
std::vector<PillarRaw> reduce_pillars(std::span<const PillarEntry> entries);

// out[cell * C + c] = stats[p][c % 4] * weights[c] for each occupied cell.
void fill_channels(std::span<const std::uint32_t> cells,
                   std::span<const std::array<double, 4>> stats,
                   std::span<const double> weights, std::span<float> out);

// y = P^T x per cell; P is C x k, row-major.
void project(std::span<const float> in, std::size_t channels,
             std::span<const double> basis, std::size_t k, std::span<float> out);

// x = P y per cell.
void unproject(std::span<const float> in, std::size_t k,
               std::span<const double> basis, std::size_t channels,
               std::span<float> out);

void elementwise_max(std::span<const std::span<const float>> inputs,
                     std::span<float> out);

// Ego-row scaled dot-product attention with identity projections; input 0 is
// the ego token.
void ego_attention(std::span<const std::span<const float>> inputs,
                   std::size_t channels, std::span<float> out);

// Nearest-neighbour resample: each output cell center is mapped through
// `to_source`; cells landing outside the source grid are zero.
void warp_nearest(std::span<const float> in, const GridGeometry& geom,
                  const Affine2& to_source, std::span<float> out);

}  // namespace omp

}  // namespace kernels
}  // namespace v2xl
