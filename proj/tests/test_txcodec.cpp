#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "samples.hpp"
#include "v2xl/txcodec.hpp"

using namespace v2xl;

namespace {

using samples::codec_spec;
using samples::random_body;
using samples::random_grid;
using samples::f32;

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::config;  // sentinel: nothing thrown
}

}  // namespace

TEST_CASE("projection basis is orthonormal and keeps the mean direction") {
  for (std::size_t k : {1, 2, 8, 64}) {
    const auto basis = projection_basis(64, k, 99);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> p(
        basis->data(), 64, static_cast<Eigen::Index>(k));
    const Eigen::MatrixXd gram = p.transpose() * p;
    CHECK((gram - Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index c = 0; c < 64; ++c) CHECK(std::abs(p(c, 0) - 0.125) < 1e-12);
  }
  CHECK(projection_basis(64, 2, 1) == projection_basis(64, 2, 1));
  CHECK(*projection_basis(64, 2, 1) != *projection_basis(64, 2, 2));
}

TEST_CASE("full-rank compression roundtrips") {
  Rng rng(21);
  const GridSpec s = codec_spec();
  const auto g = random_grid(s, rng);
  for (auto exec : {Exec::serial, Exec::parallel}) {
    const auto back = decompress(compress(g, 1, 7, ElemType::f32, exec), s, exec);
    double worst = 0;
    for (std::size_t i = 0; i < g.data.size(); ++i) worst = std::max(worst, std::abs(double(back.data[i]) - g.data[i]));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("zero grid compresses to a zero payload") {
  const GridSpec s = codec_spec();
  const auto z = BEVFeatureGrid::zeros(s);
  for (std::size_t r : {1, 4, 16}) {
    for (auto elem : {ElemType::f32, ElemType::u8_quant}) {
      const auto cf = compress(z, r, 3, elem);
      CHECK(cf.quant_scale == 0.0f);
      const auto vals = cf.values();
      CHECK(std::all_of(vals.begin(), vals.end(), [](float v) { return v == 0.0f; }));
      const auto back = decompress(cf, s);
      CHECK(std::all_of(back.data.begin(), back.data.end(), [](float v) { return v == 0.0f; }));
    }
  }
}

TEST_CASE("decompression matches the dense projection oracle") {
  Rng rng(22);
  const GridSpec s = codec_spec(32);
  const auto g = random_grid(s, rng);
  for (std::size_t r : {2, 4, 8, 32}) {
    const std::size_t k = 32 / r;
    const auto cf = compress(g, r, 1234, ElemType::f32);
    const auto back = decompress(cf, s);
    const auto basis = projection_basis(32, k, 1234);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> p(
        basis->data(), 32, static_cast<Eigen::Index>(k));
    const Eigen::MatrixXd ppt = p * p.transpose();
    double worst = 0;
    for (std::size_t cell = 0; cell < s.cells(); ++cell) {
      Eigen::VectorXd x(32);
      for (int c = 0; c < 32; ++c) x[c] = g.data[cell * 32 + static_cast<std::size_t>(c)];
      const Eigen::VectorXd expect = ppt * x;
      for (int c = 0; c < 32; ++c) worst = std::max(worst, std::abs(expect[c] - back.data[cell * 32 + static_cast<std::size_t>(c)]));
    }
    CHECK(worst < 1e-6);
    // Channel mean survives every ratio.
    for (std::size_t cell = 0; cell < s.cells(); cell += 7) {
      double a = 0, b = 0;
      for (std::size_t c = 0; c < 32; ++c) {
        a += g.data[cell * 32 + c];
        b += back.data[cell * 32 + c];
      }
      CHECK(std::abs(a - b) / 32 < 1e-5);
    }
  }
}

TEST_CASE("quantization error is bounded by half a step") {
  Rng rng(23);
  const GridSpec s = codec_spec(16);
  const auto g = random_grid(s, rng);
  for (std::size_t r : {1, 2, 4, 16}) {
    const auto exact = compress(g, r, 55, ElemType::f32).values();
    const auto q = compress(g, r, 55, ElemType::u8_quant);
    CHECK(q.payload.size() == exact.size());
    const auto vals = q.values();
    const double half = q.quant_scale / 2.0;
    double worst = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) worst = std::max(worst, std::abs(double(vals[i]) - exact[i]) - half);
    CHECK(worst <= 1e-6);
    // In the grid domain the step spreads over the basis rows.
    const auto basis = projection_basis(16, 16 / r, 55);
    const auto from_q = decompress(q, s);
    const auto from_f = decompress(compress(g, r, 55, ElemType::f32), s);
    for (std::size_t cell = 0; cell < s.cells(); cell += 3) {
      for (std::size_t c = 0; c < 16; ++c) {
        double row = 0;
        for (std::size_t j = 0; j < 16 / r; ++j) row += std::abs((*basis)[c * (16 / r) + j]);
        CHECK(std::abs(double(from_q.data[cell * 16 + c]) - from_f.data[cell * 16 + c]) <= half * row + 1e-5);
      }
    }
  }
}

TEST_CASE("serial and parallel codecs agree bit for bit") {
  Rng rng(24);
  const GridSpec s = codec_spec(32);
  const auto g = random_grid(s, rng);
  for (std::size_t r : {1, 4, 32}) {
    for (auto elem : {ElemType::f32, ElemType::u8_quant}) {
      const auto a = compress(g, r, 9, elem, Exec::serial);
      const auto b = compress(g, r, 9, elem, Exec::parallel);
      CHECK(a == b);
      CHECK(decompress(a, s, Exec::serial).data == decompress(b, s, Exec::parallel).data);
    }
  }
}

TEST_CASE("ratio validation") {
  const auto g = BEVFeatureGrid::zeros(codec_spec(16));
  CHECK(kind_of([&] { compress(g, 3, 1); }) == ErrorKind::ratio);
  CHECK(kind_of([&] { compress(g, 32, 1); }) == ErrorKind::ratio);
  CHECK(kind_of([&] { compress(g, 0, 1); }) == ErrorKind::ratio);
  CHECK(kind_of([&] { message_size(codec_spec(16), 6, ElemType::f32); }) == ErrorKind::ratio);
}

TEST_CASE("message sizes are counted from the layout") {
  WireMessage ping{1, 2, Timestamp{3}, PingBody{Timestamp{4}}};
  CHECK(serialize(ping).size() == kHeaderBytes + 8);
  CHECK(serialize(ping).size() == 34);
  WireMessage meta{1, 2, Timestamp{3}, MetadataBody{Pose{}}};
  CHECK(serialize(meta).size() == kHeaderBytes + 48);
  WireMessage dets{1, 2, Timestamp{3}, DetectionsBody{std::vector<Box3D>(3)}};
  CHECK(serialize(dets).size() == kHeaderBytes + 4 + 3 * kBoxBytes);
  WireMessage pts{1, 2, Timestamp{3}, PointCloudBody{std::vector<Point>(5)}};
  CHECK(serialize(pts).size() == kHeaderBytes + 4 + 5 * kPointBytes);

  const GridSpec s = codec_spec(16);
  Rng rng(25);
  for (std::size_t r : {1, 2, 8, 16}) {
    for (auto elem : {ElemType::f32, ElemType::u8_quant}) {
      WireMessage m{0, 0, Timestamp{}, compress(random_grid(s, rng), r, 1, elem)};
      CHECK(serialize(m).size() == message_size(s, r, elem));
      CHECK(serialized_size(m) == message_size(s, r, elem));
    }
  }
}

TEST_CASE("intermediate message sizes at the default grid") {
  const GridSpec s;
  CHECK(message_size(s, 1, ElemType::f32) == 25'600'051);
  CHECK(message_size(s, 8, ElemType::f32) == 3'200'051);
  CHECK(message_size(s, 32, ElemType::f32) == 800'051);
  CHECK(message_size(s, 64, ElemType::f32) == 400'051);
  CHECK(message_size(s, 32, ElemType::u8_quant) == 200'051);
  const auto cf = compress(BEVFeatureGrid::zeros(s), 32, 1);
  CHECK(cf.payload.size() == 800'000);
}

TEST_CASE("wire roundtrip on random messages of every kind") {
  Rng rng(26);
  for (int i = 0; i < 1000; ++i) {
    const auto kind = static_cast<MsgType>(i % 6);
    WireMessage m{static_cast<std::uint32_t>(rng.next_u64()), static_cast<std::uint32_t>(rng.next_u64()),
                  Timestamp{rng.next_u64()}, random_body(kind, rng)};
    CHECK(m.type() == kind);
    const auto bytes = serialize(m);
    CHECK(bytes.size() == serialized_size(m));
    CAPTURE(i);
    CHECK(deserialize(bytes) == m);
  }
}

TEST_CASE("deserialize rejects damaged input") {
  WireMessage m{4, 5, Timestamp{6}, DetectionsBody{std::vector<Box3D>(2)}};
  const auto good = serialize(m);

  auto bad = good;
  bad[0] ^= 0xff;
  CHECK(kind_of([&] { deserialize(bad); }) == ErrorKind::protocol);

  bad = good;
  bad[4] = 2;
  CHECK(kind_of([&] { deserialize(bad); }) == ErrorKind::version);

  bad = good;
  bad[5] = 42;
  CHECK(kind_of([&] { deserialize(bad); }) == ErrorKind::protocol);

  bad = good;
  bad[22] = static_cast<std::uint8_t>(bad[22] + 1);  // body_len one larger than present
  CHECK(kind_of([&] { deserialize(bad); }) == ErrorKind::truncation);

  bad = good;
  bad.resize(10);
  CHECK(kind_of([&] { deserialize(bad); }) == ErrorKind::truncation);

  bad = good;
  bad.push_back(0);
  CHECK(kind_of([&] { deserialize(bad); }) == ErrorKind::protocol);

  bad = good;
  bad[kHeaderBytes + 4] = 9;  // class byte of the first box
  CHECK(kind_of([&] { deserialize(bad); }) == ErrorKind::format);

  WireMessage f{0, 0, Timestamp{}, compress(BEVFeatureGrid::zeros(codec_spec(8)), 2, 1)};
  auto fb = serialize(f);
  fb[kHeaderBytes + 8] = 7;  // elem_type
  CHECK(kind_of([&] { deserialize(fb); }) == ErrorKind::format);
}

TEST_CASE("stage timing profiles") {
  const auto enc = stage_timings("paper-encoder");
  const auto dec = stage_timings("paper-decoder");
  CHECK(enc.total() == Duration::from_ms(19.59));
  CHECK(dec.total() == Duration::from_ms(0.78));
  CHECK(enc.device_transfer == Duration::from_ms(19.19));
  CHECK(dec.compression == Duration::from_ms(0.27));
  CHECK(stage_timings("zero").total().ns == 0);
  CHECK(stage_timings("1,2,3,4").total() == Duration::from_ms(10));
  CHECK(kind_of([] { stage_timings("fast"); }) == ErrorKind::config);
  CHECK(kind_of([] { stage_timings("1,2,-3,4"); }) == ErrorKind::config);
}
