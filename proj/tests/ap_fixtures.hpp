#pragma once

// Small AP cases with the precision/recall curve worked out by hand.
// Boxes are 4 x 2 cars (or the named class) on the x axis unless noted.

#include <optional>
#include <string>
#include <vector>

#include "v2xl/evaluation.hpp"

namespace fixture {

using v2xl::Box3D;
using v2xl::FramePair;
using v2xl::ObjectClass;

inline Box3D box(double x, double score = 1.0, ObjectClass cls = ObjectClass::car) {
  Box3D b;
  b.cx = x;
  b.length = 4;
  b.width = 2;
  b.height = 1.6;
  b.cz = 0.8;
  b.cls = cls;
  b.score = score;
  return b;
}

struct ApCase {
  std::string name;
  std::vector<FramePair> pairs;
  ObjectClass cls = ObjectClass::car;
  double iou_thr = 0.5;
  std::optional<double> expected;
};

inline FramePair frame(std::vector<Box3D> preds, std::vector<Box3D> gt) {
  FramePair p;
  p.predictions = std::move(preds);
  p.ground_truth = std::move(gt);
  return p;
}

inline std::vector<ApCase> ap_cases() {
  std::vector<ApCase> c;
  // P = 1 at R = 1
  c.push_back({"single hit", {frame({box(0, 0.9)}, {box(0)})}, ObjectClass::car, 0.5, 1.0});
  // nothing predicted
  c.push_back({"no predictions", {frame({}, {box(0)})}, ObjectClass::car, 0.5, 0.0});
  // TP FP TP over 2 GT: (R .5, P 1) (R 1, P 2/3) -> .5 + .5 * 2/3
  c.push_back({"tp fp tp",
               {frame({box(0, 0.9), box(50, 0.8), box(20, 0.7)}, {box(0), box(20)})},
               ObjectClass::car, 0.5, 0.5 + 0.5 * 2.0 / 3.0});
  // FP TP over 2 GT: best P at R .5 is 1/2
  c.push_back({"fp first", {frame({box(50, 0.9), box(0, 0.8)}, {box(0), box(20)})},
               ObjectClass::car, 0.5, 0.25});
  // second box on the same object is a FP after full recall
  c.push_back({"duplicate", {frame({box(0, 0.9), box(0.2, 0.8)}, {box(0)})}, ObjectClass::car,
               0.5, 1.0});
  // right place, wrong class
  c.push_back({"wrong class", {frame({box(0, 0.9, ObjectClass::truck)}, {box(0)})},
               ObjectClass::car, 0.5, 0.0});
  // no truck GT anywhere: undefined
  c.push_back({"class without gt", {frame({box(0, 0.9, ObjectClass::truck)}, {box(0)})},
               ObjectClass::truck, 0.5, std::nullopt});
  // 1.5 m shift: IoU 2.5 / 5.5
  c.push_back({"shift at 0.5", {frame({box(1.5, 0.9)}, {box(0)})}, ObjectClass::car, 0.5, 0.0});
  c.push_back({"shift at 0.3", {frame({box(1.5, 0.9)}, {box(0)})}, ObjectClass::car, 0.3, 1.0});
  // ranking spans frames: FP (.9, frame B) then TP (.6, frame A), 2 GT
  c.push_back({"across frames",
               {frame({box(0, 0.6)}, {box(0)}), frame({box(50, 0.9)}, {box(0)})},
               ObjectClass::car, 0.5, 0.25});
  // equal scores keep input order: FP then TP
  c.push_back({"tie fp first", {frame({box(50, 0.5), box(0, 0.5)}, {box(0)})},
               ObjectClass::car, 0.5, 0.5});
  c.push_back({"tie tp first", {frame({box(0, 0.5), box(50, 0.5)}, {box(0)})},
               ObjectClass::car, 0.5, 1.0});
  // TP FP FP TP TP over 3 GT: P 1,.5,1/3,.5,.6 at R 1/3,1/3,1/3,2/3,1
  // envelope 1, .6, .6
  c.push_back({"envelope",
               {frame({box(0, 0.9), box(60, 0.8), box(80, 0.7), box(20, 0.6), box(40, 0.5)},
                      {box(0), box(20), box(40)})},
               ObjectClass::car, 0.5, (1.0 + 0.6 + 0.6) / 3.0});
  // 5 GT, 6 predictions: TP TP FP TP FP TP
  // P 1,1,2/3,3/4,3/5,2/3 at R .2,.4,.4,.6,.6,.8 -> .2 + .2 + .2 * .75 + .2 * 2/3
  c.push_back({"five gt six predictions",
               {frame({box(0, 0.95), box(10, 0.9), box(70, 0.85), box(20, 0.8), box(80, 0.7),
                       box(30, 0.6)},
                      {box(0), box(10), box(20), box(30), box(40)})},
               ObjectClass::car, 0.5, 0.2 + 0.2 + 0.2 * 0.75 + 0.2 * 2.0 / 3.0});
  // overlapping GT at x=0 and x=3: the 2.5 box takes x=3 (IoU 3.5/4.5), not x=0
  c.push_back({"best iou wins", {frame({box(2.5, 0.9), box(0, 0.8)}, {box(0), box(3)})},
               ObjectClass::car, 0.5, 1.0});
  return c;
}

}  // namespace fixture
