#include "v2xl/pillar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "v2xl/rng.hpp"

namespace v2xl {

namespace {

std::size_t whole_voxels(double extent, double voxel, const char* axis) {
  const double n = extent / voxel;
  const double rounded = std::round(n);
  if (!(voxel > 0) || !(rounded >= 1) || std::abs(n - rounded) > 1e-6) {
    throw Error(ErrorKind::shape, std::string("grid extent along ") + axis +
                                      " is not a whole number of voxels");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

void GridSpec::validate() const {
  (void)rows();
  (void)cols();
  if (channels < 4) throw Error(ErrorKind::shape, "grid needs at least 4 channels");
}

std::size_t GridSpec::rows() const { return whole_voxels(x_max - x_min, voxel, "x"); }
std::size_t GridSpec::cols() const { return whole_voxels(y_max - y_min, voxel, "y"); }

std::ptrdiff_t GridSpec::cell_of(double x, double y) const {
  if (!(x >= x_min && x < x_max && y >= y_min && y < y_max)) return -1;
  const std::size_t h = rows(), w = cols();
  auto i = static_cast<std::size_t>((x - x_min) / voxel);
  auto j = static_cast<std::size_t>((y - y_min) / voxel);
  i = std::min(i, h - 1);
  j = std::min(j, w - 1);
  return static_cast<std::ptrdiff_t>(i * w + j);
}

std::array<double, 2> GridSpec::cell_center(std::size_t row, std::size_t col) const {
  return {x_min + (static_cast<double>(row) + 0.5) * voxel,
          y_min + (static_cast<double>(col) + 0.5) * voxel};
}

kernels::GridGeometry GridSpec::geometry() const {
  return {rows(), cols(), channels, x_min, y_min, voxel};
}

BEVFeatureGrid BEVFeatureGrid::zeros(const GridSpec& spec) {
  spec.validate();
  BEVFeatureGrid g;
  g.spec = spec;
  g.data.assign(spec.elements(), 0.0f);
  return g;
}

std::vector<PillarStats> pillar_statistics(const PointCloud& cloud, const GridSpec& spec,
                                           Exec exec) {
  spec.validate();
  std::vector<kernels::PillarEntry> entries;
  entries.reserve(cloud.points.size());
  for (const Point& p : cloud.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) continue;
    const auto cell = spec.cell_of(p.x, p.y);
    if (cell < 0) continue;
    entries.push_back({static_cast<std::uint32_t>(cell), p.z, p.intensity});
  }
  const auto raw = exec == Exec::serial ? kernels::serial::reduce_pillars(entries)
                                        : kernels::omp::reduce_pillars(entries);
  std::vector<PillarStats> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    const double n = static_cast<double>(r.count);
    out.push_back({r.cell, r.count, r.max_z, r.sum_z / n, r.sum_intensity / n});
  }
  return out;
}

std::vector<double> lift_weights(const GridSpec& spec) {
  Rng rng(spec.lift_seed);
  std::vector<double> w(spec.channels);
  for (auto& v : w) v = 0.5 + rng.uniform();
  return w;
}

BEVFeatureGrid pillarize(const PointCloud& cloud, const GridSpec& spec,
                         const FramePose& ego, Exec exec) {
  if (cloud.frame != ego.frame) {
    throw Error(ErrorKind::frame, "pillarize expects an ego-frame cloud (frame " +
                                      std::to_string(ego.frame) + "), got frame " +
                                      std::to_string(cloud.frame));
  }
  BEVFeatureGrid grid = BEVFeatureGrid::zeros(spec);
  grid.agent_id = ego.frame;
  grid.ego_frame_pose = ego.pose;

  const auto stats = pillar_statistics(cloud, spec, exec);
  if (stats.empty()) return grid;

  std::array<double, 4> lo, hi;
  lo.fill(INFINITY);
  hi.fill(-INFINITY);
  std::vector<std::array<double, 4>> values(stats.size());
  std::vector<std::uint32_t> cells(stats.size());
  for (std::size_t p = 0; p < stats.size(); ++p) {
    const auto& s = stats[p];
    values[p] = {static_cast<double>(s.count), s.max_z, s.mean_z, s.mean_intensity};
    cells[p] = static_cast<std::uint32_t>(s.cell);
    for (int k = 0; k < 4; ++k) {
      lo[k] = std::min(lo[k], values[p][k]);
      hi[k] = std::max(hi[k], values[p][k]);
    }
  }
  for (auto& v : values) {
    for (int k = 0; k < 4; ++k) {
      // A statistic that is constant over the occupied pillars maps to 1.
      v[k] = hi[k] > lo[k] ? (v[k] - lo[k]) / (hi[k] - lo[k]) : 1.0;
    }
  }

  const auto weights = lift_weights(spec);
  if (exec == Exec::serial) {
    kernels::serial::fill_channels(cells, values, weights, grid.data);
  } else {
    kernels::omp::fill_channels(cells, values, weights, grid.data);
  }
  return grid;
}

}  // namespace v2xl
