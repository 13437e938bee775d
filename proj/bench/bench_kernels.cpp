// Serial reference vs OpenMP kernels on the default grid, plus R-tree NMS vs
// the brute-force loop.

#include <benchmark/benchmark.h>

#include "oracles.hpp"
#include "v2xl/fusion.hpp"
#include "v2xl/pillar.hpp"
#include "v2xl/scenario.hpp"
#include "v2xl/txcodec.hpp"

using namespace v2xl;

namespace {

const GeneratedScenario& scene() {
  static const GeneratedScenario g = [] {
    ScenarioConfig cfg;
    cfg.duration_s = 0.1;
    cfg.seed = 7;
    return generate_scenario(cfg);
  }();
  return g;
}

const BEVFeatureGrid& grid() {
  static const BEVFeatureGrid g = [] {
    const auto& f = scene().logs[0].frames[0];
    return pillarize(f.cloud, GridSpec{}, FramePose{f.cloud.frame, f.pose}, Exec::serial);
  }();
  return g;
}

Exec exec_of(const benchmark::State& s) { return s.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& s) { s.SetLabel(s.range(0) ? "omp" : "serial"); }

void BM_Pillarize(benchmark::State& s) {
  const auto& f = scene().logs[0].frames[0];
  for (auto _ : s) {
    benchmark::DoNotOptimize(pillarize(f.cloud, GridSpec{}, FramePose{f.cloud.frame, f.pose}, exec_of(s)));
  }
  label(s);
}

void BM_Compress(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(compress(grid(), 32, 1, ElemType::f32, exec_of(s)));
  label(s);
}

void BM_Decompress(benchmark::State& s) {
  const auto cf = compress(grid(), 32, 1);
  for (auto _ : s) benchmark::DoNotOptimize(decompress(cf, GridSpec{}, exec_of(s)));
  label(s);
}

void BM_FuseMax(benchmark::State& s) {
  const std::vector<BEVFeatureGrid> grids{grid(), grid(), grid()};
  for (auto _ : s) benchmark::DoNotOptimize(fuse_max(grids, exec_of(s)));
  label(s);
}

void BM_FuseAttention(benchmark::State& s) {
  const std::vector<BEVFeatureGrid> grids{grid(), grid(), grid()};
  for (auto _ : s) benchmark::DoNotOptimize(fuse_attention(grids, exec_of(s)));
  label(s);
}

void BM_Warp(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(warp_grid(grid(), Pose{3.0, -1.5, 0, 0, 0, 0.3}, exec_of(s)));
  label(s);
}

std::vector<Box3D> random_boxes(std::size_t n) {
  Rng rng(n);
  std::vector<Box3D> boxes;
  for (std::size_t i = 0; i < n; ++i) boxes.push_back(oracle::random_box(rng, 60.0));
  return boxes;
}

void BM_NmsRtree(benchmark::State& s) {
  const auto boxes = random_boxes(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(nms_rtree(boxes, 0.3));
}

void BM_NmsBrute(benchmark::State& s) {
  const auto boxes = random_boxes(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(oracle::nms(boxes, 0.3));
}

}  // namespace

BENCHMARK(BM_Pillarize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Compress)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Decompress)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FuseMax)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FuseAttention)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Warp)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NmsRtree)->Arg(100)->Arg(300)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_NmsBrute)->Arg(100)->Arg(300)->Arg(1000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
