#include "v2xl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace v2xl {

namespace {

const char* class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::car: return "car";
    case ObjectClass::pedestrian: return "pedestrian";
    case ObjectClass::truck: return "truck";
  }
  return "?";
}

bool inside(const Box3D& b, const EvalRegion& r) {
  return b.cx >= r.x_min && b.cx <= r.x_max && b.cy >= r.y_min && b.cy <= r.y_max;
}

struct Ranked {
  double score;
  std::size_t pair, box;
};

// Greedy matching in descending score order; returns one TP flag per ranked
// prediction and the GT count.
std::pair<std::vector<Ranked>, std::vector<bool>> match(std::span<const FramePair> pairs,
                                                        ObjectClass cls, double iou_thr,
                                                        std::size_t& gt_count) {
  gt_count = 0;
  std::vector<Ranked> ranked;
  std::vector<std::vector<bool>> taken(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    taken[p].assign(pairs[p].ground_truth.size(), false);
    for (const auto& g : pairs[p].ground_truth) gt_count += g.cls == cls;
    for (std::size_t b = 0; b < pairs[p].predictions.size(); ++b) {
      if (pairs[p].predictions[b].cls == cls) ranked.push_back({pairs[p].predictions[b].score, p, b});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  std::vector<bool> tp(ranked.size(), false);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const FramePair& fp = pairs[ranked[i].pair];
    const Box3D& pred = fp.predictions[ranked[i].box];
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < fp.ground_truth.size(); ++g) {
      if (fp.ground_truth[g].cls != cls || taken[ranked[i].pair][g]) continue;
      const double iou = iou_bev(pred, fp.ground_truth[g]);
      if (iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best >= iou_thr) {
      taken[ranked[i].pair][best_gt] = true;
      tp[i] = true;
    }
  }
  return {std::move(ranked), std::move(tp)};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_thr(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2g", v);
  return buf;
}

}  // namespace

Alignment align(const RunRecord& record, const Scenario& scenario, double tolerance,
                const EvalRegion& region) {
  Alignment out;
  const auto keys = scenario.key_frames();
  const auto limit = static_cast<double>(scenario.period().ns) * tolerance;
  for (const auto& f : record.frames) {
    auto it = std::lower_bound(keys.begin(), keys.end(), f.stamp);
    const Timestamp* best = nullptr;
    double best_gap = 0;
    auto consider = [&](std::vector<Timestamp>::const_iterator k) {
      const double gap = std::abs(static_cast<double>(k->ns) - static_cast<double>(f.stamp.ns));
      if (!best || gap < best_gap) {
        best = &*k;
        best_gap = gap;
      }
    };
    if (it != keys.end()) consider(it);
    if (it != keys.begin()) consider(std::prev(it));
    if (!best || best_gap > limit) {
      ++out.skipped;
      continue;
    }
    FramePair pair;
    pair.stamp = f.stamp;
    pair.key = *best;
    for (const auto& b : f.detections.boxes) {
      if (inside(b, region)) pair.predictions.push_back(b);
    }
    for (const auto& g : scenario.ground_truth(record.ego_id, *best)) {
      if (inside(g, region)) pair.ground_truth.push_back(g);
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

std::optional<double> average_precision(std::span<const FramePair> pairs, ObjectClass cls,
                                        double iou_thr) {
  std::size_t gt_count = 0;
  auto [ranked, tp] = match(pairs, cls, iou_thr, gt_count);
  if (gt_count == 0) return std::nullopt;

  std::vector<double> precision, recall;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    hits += tp[i];
    precision.push_back(static_cast<double>(hits) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(hits) / static_cast<double>(gt_count));
  }
  // Precision envelope, then area under the stepwise curve.
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double recall(std::span<const FramePair> pairs, double iou_thr) {
  std::size_t total = 0, hits = 0;
  for (auto cls : kAllClasses) {
    std::size_t gt_count = 0;
    auto [ranked, tp] = match(pairs, cls, iou_thr, gt_count);
    total += gt_count;
    hits += static_cast<std::size_t>(std::count(tp.begin(), tp.end(), true));
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

std::optional<double> Report::map(double iou_thr) const {
  for (const auto& r : ap) {
    if (r.cls == "mAP" && r.iou_thr == iou_thr) return r.ap;
  }
  return std::nullopt;
}

std::string Report::ap_csv() const {
  std::string s = "class,iou_thr,ap\n";
  for (const auto& r : ap) {
    s += r.cls + "," + fmt_thr(r.iou_thr) + "," + (r.ap ? fmt(*r.ap) : "NA") + "\n";
  }
  return s;
}

std::string Report::latency_csv() const {
  std::string s = "stage,mean_ms,p95_ms\n";
  for (const auto& r : latency) s += r.stage + "," + fmt(r.mean_ms) + "," + fmt(r.p95_ms) + "\n";
  return s;
}

std::string Report::sizes_csv() const {
  std::string s = "kind,messages,mean_bytes,max_bytes\n";
  for (const auto& r : sizes) {
    s += r.kind + "," + std::to_string(r.messages) + "," + fmt(r.mean_bytes) + "," +
         std::to_string(r.max_bytes) + "\n";
  }
  return s;
}

std::string Report::text() const {
  std::ostringstream os;
  os << "frames evaluated: " << frames << " (skipped " << skipped << ")\n";
  os << "recall@0.5: " << fmt(recall_05) << "\n\n";
  os << "average precision\n";
  for (const auto& r : ap) {
    char line[128];
    std::snprintf(line, sizeof line, "  %-11s @%.1f  %s\n", r.cls.c_str(), r.iou_thr,
                  r.ap ? fmt(*r.ap).c_str() : "n/a");
    os << line;
  }
  char head[96];
  std::snprintf(head, sizeof head, "\n%-26s %10s %10s\n", "latency (ms)", "mean", "p95");
  os << head;
  for (const auto& r : latency) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-24s %10.3f %10.3f\n", r.stage.c_str(), r.mean_ms, r.p95_ms);
    os << line;
  }
  os << "\nmessages\n";
  if (sizes.empty()) os << "  none received\n";
  for (const auto& r : sizes) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-13s %8zu msgs  mean %.1f B  max %zu B\n", r.kind.c_str(),
                  r.messages, r.mean_bytes, r.max_bytes);
    os << line;
  }
  return os.str();
}

Report evaluate(const RunRecord& record, const Scenario& scenario, double tolerance) {
  Report rep;
  const Alignment al = align(record, scenario, tolerance);
  rep.frames = al.pairs.size();
  rep.skipped = al.skipped;
  rep.recall_05 = recall(al.pairs, 0.5);

  for (double thr : kEvalIouThresholds) {
    double sum = 0;
    std::size_t defined = 0;
    for (auto cls : kAllClasses) {
      auto ap = average_precision(al.pairs, cls, thr);
      if (ap) {
        sum += *ap;
        ++defined;
      }
      rep.ap.push_back(ApRow{class_name(cls), thr, ap});
    }
    std::optional<double> m;
    if (defined > 0) m = sum / static_cast<double>(defined);
    rep.ap.push_back(ApRow{"mAP", thr, m});
  }

  std::vector<std::pair<std::string, std::vector<double>>> stages = {
      {"encoder.compression", {}},     {"encoder.device_transfer", {}},
      {"encoder.serialization", {}},   {"encoder.packaging", {}},
      {"transport", {}},               {"decoder.compression", {}},
      {"decoder.device_transfer", {}}, {"decoder.serialization", {}},
      {"decoder.packaging", {}},       {"total", {}}};
  std::map<MsgType, SizeRow> sizes;
  for (const auto& f : record.frames) {
    for (const auto& m : f.messages) {
      const Duration parts[] = {m.encoder.compression,   m.encoder.device_transfer,
                                m.encoder.serialization, m.encoder.packaging,
                                m.transport,             m.decoder.compression,
                                m.decoder.device_transfer, m.decoder.serialization,
                                m.decoder.packaging};
      double total = 0;
      for (std::size_t i = 0; i < 9; ++i) {
        stages[i].second.push_back(parts[i].ms());
        total += parts[i].ms();
      }
      stages[9].second.push_back(total);
      SizeRow& row = sizes[m.kind];
      row.kind = to_string(m.kind);
      row.mean_bytes += static_cast<double>(m.bytes);
      row.max_bytes = std::max(row.max_bytes, m.bytes);
      ++row.messages;
    }
  }
  for (auto& [name, values] : stages) {
    LatencyRow row{name, values.size(), 0, 0};
    if (!values.empty()) {
      double sum = 0;
      for (double v : values) sum += v;
      row.mean_ms = sum / static_cast<double>(values.size());
      std::sort(values.begin(), values.end());
      const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(values.size())));
      row.p95_ms = values[std::max<std::size_t>(rank, 1) - 1];
    }
    rep.latency.push_back(row);
  }
  for (auto& [kind, row] : sizes) {
    row.mean_bytes /= static_cast<double>(row.messages);
    rep.sizes.push_back(row);
  }
  return rep;
}

}  // namespace v2xl
