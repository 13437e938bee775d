#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "v2xl/core.hpp"
#include "v2xl/kernels.hpp"
#include "v2xl/pillar.hpp"

namespace v2xl {

struct NmsStats {
  std::size_t iou_evaluations = 0;
  std::size_t boxes = 0;
};

// Greedy score-descending NMS, independent per class. A box is suppressed by
// an earlier kept box when their BEV IoU exceeds `iou_thr`. Ties on score go
// to the lower input index. Overlap candidates come from an R-tree over the
// footprints, so only nearby pairs are scored. Output is in rank order.
std::vector<Box3D> nms_rtree(std::span<const Box3D> boxes, double iou_thr,
                             NmsStats* stats = nullptr);

// A collaborator cloud with the pose of the frame it is tagged with.
struct CollaboratorCloud {
  PointCloud cloud;
  FramePose source;
};

// Maps every collaborator cloud into the ego frame and concatenates, ego
// points first. A cloud already tagged with the ego frame is appended as-is.
PointCloud early_fuse(const PointCloud& ego, std::span<const CollaboratorCloud> others,
                      const Pose& ego_pose);

// Union of the sets (ordered by agent id, ego ties first) passed through
// nms_rtree. The result carries the first set's stamp and agent id.
DetectionSet late_fuse(std::span<const DetectionSet> sets, double iou_thr,
                       NmsStats* stats = nullptr);

// Element-wise maximum (F-Cooper style).
BEVFeatureGrid fuse_max(std::span<const BEVFeatureGrid> grids, Exec exec = Exec::parallel);

// Per-cell self-attention row of the ego token (grids[0]) with identity
// projections: softmax(x_ego . x_j / sqrt(C)) weighted sum of x_j.
BEVFeatureGrid fuse_attention(std::span<const BEVFeatureGrid> grids,
                              Exec exec = Exec::parallel);

// Nearest-neighbour resample moving the grid content by the planar part
// (x, y, yaw) of `rel`. Cells mapped from outside the grid are zero.
BEVFeatureGrid warp_grid(const BEVFeatureGrid& grid, const Pose& rel,
                         Exec exec = Exec::parallel);

struct DetectorConfig {
  double objectness_thr = 0.35;
  double iou_thr = 0.1;
  std::size_t min_cells = 3;
};

// Per-cell objectness (channel mean) thresholded and grouped into 8-connected
// components; one axis-aligned box per component sized to its cell extent,
// scored by the component's mean objectness, then nms_rtree. Components
// smaller than min_cells are dropped.
DetectionSet detect(const BEVFeatureGrid& grid, const DetectorConfig& cfg = {});

// Footprint-based class: small -> pedestrian, long -> truck, else car.
ObjectClass classify_footprint(double length, double width);

}  // namespace v2xl
