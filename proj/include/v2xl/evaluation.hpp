#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v2xl/replay.hpp"
#include "v2xl/scenario.hpp"

namespace v2xl {

struct FramePair {
  Timestamp stamp;  // output stamp
  Timestamp key;    // matched key frame
  std::vector<Box3D> predictions;
  std::vector<Box3D> ground_truth;
};

struct Alignment {
  std::vector<FramePair> pairs;
  std::size_t skipped = 0;
};

struct EvalRegion {
  double x_min = -100, x_max = 100, y_min = -40, y_max = 40;
};

// Pairs each output with the nearest key frame no further than
// tolerance * period away; predictions and ground truth are clipped to the
// region by box center.
Alignment align(const RunRecord& record, const Scenario& scenario, double tolerance = 0.5,
                const EvalRegion& region = {});

// All-point interpolated AP; nullopt when the class has no ground truth in
// any pair (predictions alone do not define it).
std::optional<double> average_precision(std::span<const FramePair> pairs, ObjectClass cls,
                                        double iou_thr);

// Fraction of ground-truth boxes (any class) matched by a same-class
// prediction at iou_thr with greedy score-ordered matching. 0 without GT.
double recall(std::span<const FramePair> pairs, double iou_thr);

struct ApRow {
  std::string cls;  // class name or "mAP"
  double iou_thr = 0;
  std::optional<double> ap;
};

struct LatencyRow {
  std::string stage;
  std::size_t samples = 0;
  double mean_ms = 0, p95_ms = 0;
};

struct SizeRow {
  std::string kind;
  std::size_t messages = 0;
  double mean_bytes = 0;
  std::size_t max_bytes = 0;
};

struct Report {
  std::vector<ApRow> ap;
  std::vector<LatencyRow> latency;
  std::vector<SizeRow> sizes;
  double recall_05 = 0;
  std::size_t frames = 0, skipped = 0;

  std::optional<double> map(double iou_thr) const;
  std::string ap_csv() const;
  std::string latency_csv() const;
  std::string sizes_csv() const;
  std::string text() const;
};

inline constexpr double kEvalIouThresholds[] = {0.3, 0.5};

Report evaluate(const RunRecord& record, const Scenario& scenario, double tolerance = 0.5);

}  // namespace v2xl
