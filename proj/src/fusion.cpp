#include "v2xl/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include "v2xl/rtree.hpp"

namespace v2xl {

namespace {

// Rank order: score descending, then input index.
std::vector<std::size_t> ranked(std::span<const Box3D> boxes) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;
  });
  return order;
}

void check_same_spec(std::span<const BEVFeatureGrid> grids) {
  if (grids.empty()) throw Error(ErrorKind::shape, "fusion needs at least one grid");
  for (const auto& g : grids) {
    if (!(g.spec == grids[0].spec) || g.data.size() != grids[0].spec.elements()) {
      throw Error(ErrorKind::shape, "fused grids must share one spec");
    }
  }
}

std::vector<std::span<const float>> views(std::span<const BEVFeatureGrid> grids) {
  std::vector<std::span<const float>> out;
  out.reserve(grids.size());
  for (const auto& g : grids) out.emplace_back(g.data);
  return out;
}

BEVFeatureGrid like(const BEVFeatureGrid& ego) {
  BEVFeatureGrid out;
  out.spec = ego.spec;
  out.stamp = ego.stamp;
  out.agent_id = ego.agent_id;
  out.ego_frame_pose = ego.ego_frame_pose;
  out.data.resize(ego.data.size());
  return out;
}

}  // namespace

std::vector<Box3D> nms_rtree(std::span<const Box3D> boxes, double iou_thr, NmsStats* stats) {
  const auto order = ranked(boxes);
  std::vector<std::size_t> rank(boxes.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  std::vector<char> suppressed(boxes.size(), 0);
  std::vector<std::size_t> kept;
  std::size_t evaluations = 0;

  for (ObjectClass cls : kAllClasses) {
    std::vector<std::size_t> members;
    for (std::size_t i : order)
      if (boxes[i].cls == cls) members.push_back(i);
    if (members.empty()) continue;

    std::vector<Rect> rects;
    rects.reserve(members.size());
    for (std::size_t i : members) rects.push_back(bev_aabb(boxes[i]));
    const RTreeIndex index(rects);

    for (std::size_t m = 0; m < members.size(); ++m) {
      const std::size_t i = members[m];
      if (suppressed[i]) continue;
      kept.push_back(i);
      for (std::size_t hit : index.query(rects[m])) {
        const std::size_t j = members[hit];
        if (rank[j] <= rank[i] || suppressed[j]) continue;
        ++evaluations;
        if (iou_bev(boxes[i], boxes[j]) > iou_thr) suppressed[j] = 1;
      }
    }
  }

  std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
  std::vector<Box3D> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(boxes[i]);
  if (stats) {
    stats->iou_evaluations += evaluations;
    stats->boxes += boxes.size();
  }
  return out;
}

PointCloud early_fuse(const PointCloud& ego, std::span<const CollaboratorCloud> others,
                      const Pose& ego_pose) {
  PointCloud merged = ego;
  const FramePose target{ego.frame, ego_pose};
  for (const auto& other : others) {
    if (other.cloud.frame != other.source.frame) {
      throw Error(ErrorKind::frame, "collaborator cloud tagged with frame " +
                                        std::to_string(other.cloud.frame) + " but posed as " +
                                        std::to_string(other.source.frame));
    }
    if (other.cloud.frame == ego.frame) {
      merged.points.insert(merged.points.end(), other.cloud.points.begin(),
                           other.cloud.points.end());
      continue;
    }
    const PointCloud moved = transform_points(other.cloud, other.source, target);
    merged.points.insert(merged.points.end(), moved.points.begin(), moved.points.end());
  }
  return merged;
}

DetectionSet late_fuse(std::span<const DetectionSet> sets, double iou_thr, NmsStats* stats) {
  DetectionSet out;
  if (sets.empty()) return out;
  out.stamp = sets[0].stamp;
  out.agent_id = sets[0].agent_id;

  std::vector<std::size_t> order(sets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sets[a].agent_id < sets[b].agent_id; });
  std::vector<Box3D> all;
  for (std::size_t s : order) all.insert(all.end(), sets[s].boxes.begin(), sets[s].boxes.end());
  out.boxes = nms_rtree(all, iou_thr, stats);
  return out;
}

BEVFeatureGrid fuse_max(std::span<const BEVFeatureGrid> grids, Exec exec) {
  check_same_spec(grids);
  BEVFeatureGrid out = like(grids[0]);
  const auto inputs = views(grids);
  if (exec == Exec::serial) {
    kernels::serial::elementwise_max(inputs, out.data);
  } else {
    kernels::omp::elementwise_max(inputs, out.data);
  }
  return out;
}

BEVFeatureGrid fuse_attention(std::span<const BEVFeatureGrid> grids, Exec exec) {
  check_same_spec(grids);
  BEVFeatureGrid out = like(grids[0]);
  const auto inputs = views(grids);
  if (exec == Exec::serial) {
    kernels::serial::ego_attention(inputs, grids[0].spec.channels, out.data);
  } else {
    kernels::omp::ego_attention(inputs, grids[0].spec.channels, out.data);
  }
  return out;
}

BEVFeatureGrid warp_grid(const BEVFeatureGrid& grid, const Pose& rel, Exec exec) {
  BEVFeatureGrid out = like(grid);
  if (rel.x == 0 && rel.y == 0 && rel.yaw == 0) {
    out.data = grid.data;
    return out;
  }
  // Output cell p samples the source at R(-yaw) (p - t).
  const double c = std::cos(rel.yaw), s = std::sin(rel.yaw);
  kernels::Affine2 to_source{c, s, -s, c, -(c * rel.x + s * rel.y), -(-s * rel.x + c * rel.y)};
  const auto geom = grid.spec.geometry();
  if (exec == Exec::serial) {
    kernels::serial::warp_nearest(grid.data, geom, to_source, out.data);
  } else {
    kernels::omp::warp_nearest(grid.data, geom, to_source, out.data);
  }
  return out;
}

ObjectClass classify_footprint(double length, double width) {
  const double longest = std::max(length, width);
  if (longest <= 1.6) return ObjectClass::pedestrian;
  if (longest >= 7.0) return ObjectClass::truck;
  return ObjectClass::car;
}

namespace {

double class_height(ObjectClass c) {
  switch (c) {
    case ObjectClass::pedestrian: return 1.75;
    case ObjectClass::truck: return 3.4;
    case ObjectClass::car: break;
  }
  return 1.6;
}

}  // namespace

DetectionSet detect(const BEVFeatureGrid& grid, const DetectorConfig& cfg) {
  DetectionSet out;
  out.stamp = grid.stamp;
  out.agent_id = grid.agent_id;

  const GridSpec& spec = grid.spec;
  const std::size_t h = spec.rows(), w = spec.cols(), channels = spec.channels;
  if (grid.data.size() != spec.elements()) throw Error(ErrorKind::shape, "grid data does not match its spec");

  std::vector<double> objectness(h * w);
  std::vector<char> active(h * w, 0);
  for (std::size_t cell = 0; cell < h * w; ++cell) {
    double sum = 0.0;
    const float* v = grid.data.data() + cell * channels;
    for (std::size_t c = 0; c < channels; ++c) sum += v[c];
    objectness[cell] = sum / static_cast<double>(channels);
    active[cell] = objectness[cell] > cfg.objectness_thr;
  }

  std::vector<Box3D> candidates;
  std::vector<char> seen(h * w, 0);
  std::deque<std::size_t> frontier;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (!active[start] || seen[start]) continue;
    seen[start] = 1;
    frontier.assign(1, start);
    std::size_t n = 0, sum_i = 0, sum_j = 0;
    std::size_t min_i = h, max_i = 0, min_j = w, max_j = 0;
    double score = 0.0;
    while (!frontier.empty()) {
      const std::size_t cell = frontier.front();
      frontier.pop_front();
      const std::size_t i = cell / w, j = cell % w;
      ++n;
      sum_i += i;
      sum_j += j;
      min_i = std::min(min_i, i);
      max_i = std::max(max_i, i);
      min_j = std::min(min_j, j);
      max_j = std::max(max_j, j);
      score += objectness[cell];
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const auto ni = static_cast<std::ptrdiff_t>(i) + di;
          const auto nj = static_cast<std::ptrdiff_t>(j) + dj;
          if (ni < 0 || nj < 0 || ni >= static_cast<std::ptrdiff_t>(h) ||
              nj >= static_cast<std::ptrdiff_t>(w)) {
            continue;
          }
          const std::size_t next = static_cast<std::size_t>(ni) * w + static_cast<std::size_t>(nj);
          if (active[next] && !seen[next]) {
            seen[next] = 1;
            frontier.push_back(next);
          }
        }
      }
    }
    if (n < cfg.min_cells) continue;

    const double count = static_cast<double>(n);
    Box3D box;
    box.cx = spec.x_min + (static_cast<double>(sum_i) / count + 0.5) * spec.voxel;
    box.cy = spec.y_min + (static_cast<double>(sum_j) / count + 0.5) * spec.voxel;
    box.length = static_cast<double>(max_i - min_i + 1) * spec.voxel;
    box.width = static_cast<double>(max_j - min_j + 1) * spec.voxel;
    box.yaw = 0.0;
    box.cls = classify_footprint(box.length, box.width);
    box.height = class_height(box.cls);
    box.cz = 0.5 * box.height;
    box.score = std::clamp(score / count, 0.0, 1.0);
    candidates.push_back(box);
  }
  out.boxes = nms_rtree(candidates, cfg.iou_thr);
  return out;
}

}  // namespace v2xl
