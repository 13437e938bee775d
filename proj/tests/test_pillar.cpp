#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "v2xl/pillar.hpp"

using namespace v2xl;

namespace {

GridSpec small_spec() {
  GridSpec s;
  s.x_min = -10;
  s.x_max = 10;
  s.y_min = -6;
  s.y_max = 6;
  s.voxel = 0.5;
  s.channels = 8;
  return s;
}

PointCloud random_cloud(Rng& rng, std::size_t n, double extent, FrameId frame = 0) {
  PointCloud c;
  c.frame = frame;
  for (std::size_t i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-2, 3), rng.uniform()});
  return c;
}

std::size_t occupied(const BEVFeatureGrid& g) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.spec.cells(); ++i) {
    const auto v = g.cell(i);
    n += std::any_of(v.begin(), v.end(), [](float x) { return x != 0.0f; });
  }
  return n;
}

}  // namespace

TEST_CASE("default grid geometry") {
  const GridSpec s;
  CHECK(s.rows() == 500);
  CHECK(s.cols() == 200);
  CHECK(s.channels == 64);
  CHECK(s.elements() * 4 == 25'600'000);
}

TEST_CASE("empty cloud gives an all-zero default grid") {
  const GridSpec s;
  const auto g = pillarize(PointCloud{}, s, FramePose{});
  CHECK(g.data.size() == 500u * 200u * 64u);
  CHECK(std::all_of(g.data.begin(), g.data.end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("single point occupies exactly one pillar") {
  const GridSpec s = small_spec();
  PointCloud c{{{0.1, 0.1, 1.0, 0.5}}, 0};
  const auto g = pillarize(c, s, FramePose{});
  CHECK(occupied(g) == 1);
  const auto stats = pillar_statistics(c, s);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].count == 1);
  CHECK(stats[0].cell == static_cast<std::size_t>(s.cell_of(0.1, 0.1)));
}

TEST_CASE("pillar statistics of two stacked points") {
  const GridSpec s = small_spec();
  PointCloud c{{{1.1, 1.1, 1.0, 0.2}, {1.2, 1.3, 3.0, 0.6}}, 0};
  const auto stats = pillar_statistics(c, s);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].count == 2);
  CHECK(stats[0].max_z == 3.0);
  CHECK(stats[0].mean_z == 2.0);
  CHECK(stats[0].mean_intensity == doctest::Approx(0.4));
}

TEST_CASE("points outside the extent are ignored") {
  const GridSpec s = small_spec();
  PointCloud c{{{10.0, 0, 0, 0}, {-10.01, 0, 0, 0}, {0, 6.0, 0, 0}, {NAN, 0, 0, 0}}, 0};
  CHECK(pillar_statistics(c, s).empty());
  CHECK(s.cell_of(-10.0, -6.0) == 0);
}

TEST_CASE("lift weights and normalized range") {
  const GridSpec s = small_spec();
  const auto w = lift_weights(s);
  REQUIRE(w.size() == s.channels);
  for (double v : w) {
    CHECK(v >= 0.5);
    CHECK(v <= 1.5);
  }
  Rng rng(3);
  const auto g = pillarize(random_cloud(rng, 2000, 12), s, FramePose{});
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    CHECK(g.data[i] >= 0.0f);
    CHECK(g.data[i] <= static_cast<float>(w[i % s.channels]) + 1e-6f);
  }
}

TEST_CASE("channel layout follows statistic index modulo four") {
  const GridSpec s = small_spec();
  PointCloud c{{{0.1, 0.1, 1.0, 0.5}, {3.1, 2.1, 2.0, 0.9}, {3.2, 2.2, 0.5, 0.1}}, 0};
  const auto g = pillarize(c, s, FramePose{});
  const auto w = lift_weights(s);
  const auto cell = static_cast<std::size_t>(s.cell_of(3.1, 2.1));
  const auto v = g.cell(cell);
  // The two-point pillar holds the max count and max z of the grid.
  CHECK(v[0] == doctest::Approx(w[0]));
  CHECK(v[1] == doctest::Approx(w[1]));
  CHECK(v[4] == doctest::Approx(w[4]));
  CHECK(v[5] == doctest::Approx(w[5]));
}

TEST_CASE("pillarize is permutation invariant and deterministic") {
  const GridSpec s = small_spec();
  Rng rng(4);
  PointCloud c = random_cloud(rng, 3000, 11);
  // Duplicate cells heavily so accumulation order matters.
  for (std::size_t i = 0; i < 1000; ++i) c.points.push_back({0.2, 0.2, rng.uniform(-1, 2), rng.uniform()});
  const auto base = pillarize(c, s, FramePose{});
  std::mt19937 shuffle(5);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(c.points.begin(), c.points.end(), shuffle);
    CHECK(pillarize(c, s, FramePose{}).data == base.data);
    CHECK(pillarize(c, s, FramePose{}, Exec::serial).data == base.data);
  }
}

TEST_CASE("moving a point inside its pillar leaves other pillars alone") {
  const GridSpec s = small_spec();
  Rng rng(6);
  PointCloud c = random_cloud(rng, 500, 9);
  c.points.push_back({2.05, 2.05, 0.3, 0.5});
  const auto before = pillarize(c, s, FramePose{});
  c.points.back().x = 2.45;
  c.points.back().y = 2.3;
  const auto after = pillarize(c, s, FramePose{});
  const auto moved = static_cast<std::size_t>(s.cell_of(2.05, 2.05));
  for (std::size_t cell = 0; cell < s.cells(); ++cell) {
    if (cell == moved) continue;
    const auto a = before.cell(cell), b = after.cell(cell);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("pillarize checks the frame tag and spec") {
  const GridSpec s = small_spec();
  PointCloud c{{{0, 0, 0, 0}}, 2};
  try {
    pillarize(c, s, FramePose{3, Pose{}});
    FAIL("expected frame error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::frame);
  }
  GridSpec bad = s;
  bad.voxel = 0.3;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = s;
  bad.channels = 3;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("grid metadata is carried through") {
  const GridSpec s = small_spec();
  const Pose p{1, 2, 3, 0, 0, 0.5};
  const auto g = pillarize(PointCloud{{}, 4}, s, FramePose{4, p});
  CHECK(g.agent_id == 4);
  CHECK(g.ego_frame_pose == p);
  CHECK(g.spec == s);
}
