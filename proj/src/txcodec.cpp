#include "v2xl/txcodec.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <tuple>

#include "bytes.hpp"
#include "v2xl/rng.hpp"

namespace v2xl {

std::size_t element_size(ElemType t) {
  switch (t) {
    case ElemType::f32: return 4;
    case ElemType::u8_quant: return 1;
  }
  throw Error(ErrorKind::format, "unknown element type " + std::to_string(static_cast<int>(t)));
}

const char* to_string(MsgType t) noexcept {
  switch (t) {
    case MsgType::metadata: return "metadata";
    case MsgType::intermediate: return "intermediate";
    case MsgType::detections: return "detections";
    case MsgType::pointcloud: return "pointcloud";
    case MsgType::ping: return "ping";
    case MsgType::pong: return "pong";
  }
  return "unknown";
}

std::vector<float> CompressedFeature::values() const {
  const std::size_t n = element_count();
  if (payload.size() != n * element_size(elem_type)) {
    throw Error(ErrorKind::format, "payload length does not match h*w*(c/r)");
  }
  std::vector<float> out(n);
  if (elem_type == ElemType::f32) {
    detail::ByteReader r(payload);
    for (auto& v : out) v = r.f32();
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = static_cast<float>(static_cast<double>(payload[i]) * quant_scale + quant_offset);
    }
  }
  return out;
}

namespace {

std::vector<double> make_basis(std::size_t channels, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  // Column-major working copy for Gram-Schmidt.
  std::vector<double> cols(channels * k);
  for (auto& v : cols) v = rng.normal();
  // First direction is the channel mean, so per-cell mean survives any ratio.
  std::fill(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(channels), 1.0);
  for (std::size_t j = 0; j < k; ++j) {
    double* q = cols.data() + j * channels;
    // Two passes of modified Gram-Schmidt keep orthogonality near machine
    // precision.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < j; ++p) {
        const double* prev = cols.data() + p * channels;
        double dot = 0.0;
        for (std::size_t c = 0; c < channels; ++c) dot += prev[c] * q[c];
        for (std::size_t c = 0; c < channels; ++c) q[c] -= dot * prev[c];
      }
    }
    double norm = 0.0;
    for (std::size_t c = 0; c < channels; ++c) norm += q[c] * q[c];
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < channels; ++c) q[c] /= norm;
  }
  std::vector<double> basis(channels * k);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t j = 0; j < k; ++j) basis[c * k + j] = cols[j * channels + c];
  return basis;
}

}  // namespace

std::shared_ptr<const std::vector<double>> projection_basis(std::size_t channels,
                                                             std::size_t k,
                                                             std::uint64_t seed) {
  using Key = std::tuple<std::size_t, std::size_t, std::uint64_t>;
  static std::shared_mutex mutex;
  static std::map<Key, std::shared_ptr<const std::vector<double>>> cache;

  const Key key{channels, k, seed};
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto basis = std::make_shared<const std::vector<double>>(make_basis(channels, k, seed));
  std::unique_lock lock(mutex);
  return cache.try_emplace(key, std::move(basis)).first->second;
}

void check_ratio(std::size_t channels, std::size_t ratio) {
  if (ratio == 0 || !std::has_single_bit(ratio) || ratio > 0xFFFF || channels % ratio != 0) {
    throw Error(ErrorKind::ratio, "compression ratio " + std::to_string(ratio) +
                                      " must be a power of two dividing " +
                                      std::to_string(channels) + " channels");
  }
}

CompressedFeature compress(const BEVFeatureGrid& grid, std::size_t ratio,
                           std::uint64_t seed, ElemType elem, Exec exec) {
  const GridSpec& spec = grid.spec;
  const std::size_t channels = spec.channels;
  check_ratio(channels, ratio);
  const std::size_t h = spec.rows(), w = spec.cols();
  if (h > 0xFFFF || w > 0xFFFF || channels > 0xFFFF) {
    throw Error(ErrorKind::size, "grid dimensions exceed 16-bit wire fields");
  }
  if (grid.data.size() != spec.elements()) {
    throw Error(ErrorKind::shape, "grid data does not match its spec");
  }
  const std::size_t k = channels / ratio;
  const auto basis = projection_basis(channels, k, seed);

  std::vector<float> projected(h * w * k);
  if (exec == Exec::serial) {
    kernels::serial::project(grid.data, channels, *basis, k, projected);
  } else {
    kernels::omp::project(grid.data, channels, *basis, k, projected);
  }

  CompressedFeature cf;
  cf.h = static_cast<std::uint16_t>(h);
  cf.w = static_cast<std::uint16_t>(w);
  cf.c_orig = static_cast<std::uint16_t>(channels);
  cf.ratio = static_cast<std::uint16_t>(ratio);
  cf.elem_type = elem;
  cf.projection_seed = seed;

  if (elem == ElemType::f32) {
    cf.payload.reserve(projected.size() * 4);
    detail::ByteWriter wr(cf.payload);
    for (float v : projected) wr.f32(v);
    return cf;
  }
  if (elem != ElemType::u8_quant) {
    throw Error(ErrorKind::format, "unknown element type");
  }

  float lo = 0.0f, hi = 0.0f;
  if (!projected.empty()) {
    const auto [mn, mx] = std::minmax_element(projected.begin(), projected.end());
    lo = *mn;
    hi = *mx;
  }
  cf.quant_offset = lo;
  cf.quant_scale = static_cast<float>((static_cast<double>(hi) - lo) / 255.0);
  cf.payload.resize(projected.size(), 0);
  if (cf.quant_scale > 0.0f) {
    const double scale = cf.quant_scale, offset = cf.quant_offset;
    for (std::size_t i = 0; i < projected.size(); ++i) {
      const double q = std::nearbyint((projected[i] - offset) / scale);
      cf.payload[i] = static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
    }
  }
  return cf;
}

BEVFeatureGrid decompress(const CompressedFeature& cf, const GridSpec& spec, Exec exec) {
  (void)element_size(cf.elem_type);
  check_ratio(cf.c_orig, cf.ratio);
  if (spec.rows() != cf.h || spec.cols() != cf.w || spec.channels != cf.c_orig) {
    throw Error(ErrorKind::shape, "compressed feature shape does not match grid spec");
  }
  const std::size_t k = cf.reduced_channels();
  const auto values = cf.values();
  const auto basis = projection_basis(cf.c_orig, k, cf.projection_seed);

  BEVFeatureGrid grid = BEVFeatureGrid::zeros(spec);
  if (exec == Exec::serial) {
    kernels::serial::unproject(values, k, *basis, cf.c_orig, grid.data);
  } else {
    kernels::omp::unproject(values, k, *basis, cf.c_orig, grid.data);
  }
  return grid;
}

BEVFeatureGrid decompress(const CompressedFeature& cf, Exec exec) {
  GridSpec spec;
  spec.channels = cf.c_orig;
  spec.x_min = -0.5 * cf.h * spec.voxel;
  spec.x_max = 0.5 * cf.h * spec.voxel;
  spec.y_min = -0.5 * cf.w * spec.voxel;
  spec.y_max = 0.5 * cf.w * spec.voxel;
  return decompress(cf, spec, exec);
}

std::size_t body_size(const MessageBody& body) {
  struct Visitor {
    std::size_t operator()(const MetadataBody&) const { return 6 * 8; }
    std::size_t operator()(const CompressedFeature& cf) const {
      return kFeatureHeaderBytes + cf.payload.size();
    }
    std::size_t operator()(const DetectionsBody& d) const { return 4 + kBoxBytes * d.boxes.size(); }
    std::size_t operator()(const PointCloudBody& p) const {
      return 4 + kPointBytes * p.points.size();
    }
    std::size_t operator()(const PingBody&) const { return 8; }
    std::size_t operator()(const PongBody&) const { return 8; }
  };
  return std::visit(Visitor{}, body);
}

std::size_t serialized_size(const WireMessage& msg) { return kHeaderBytes + body_size(msg.body); }

namespace {

constexpr std::uint8_t kMagic[4] = {'V', '2', 'X', 'L'};

void write_body(detail::ByteWriter& w, const MessageBody& body) {
  struct Visitor {
    detail::ByteWriter& w;
    void operator()(const MetadataBody& m) const {
      for (double v : {m.pose.x, m.pose.y, m.pose.z, m.pose.roll, m.pose.pitch, m.pose.yaw})
        w.f64(v);
    }
    void operator()(const CompressedFeature& cf) const {
      if (cf.payload.size() != cf.element_count() * element_size(cf.elem_type)) {
        throw Error(ErrorKind::format, "payload length does not match h*w*(c/r)");
      }
      w.u16(cf.h);
      w.u16(cf.w);
      w.u16(cf.c_orig);
      w.u16(cf.ratio);
      w.u8(static_cast<std::uint8_t>(cf.elem_type));
      w.f32(cf.quant_scale);
      w.f32(cf.quant_offset);
      w.u64(cf.projection_seed);
      w.bytes(cf.payload);
    }
    void operator()(const DetectionsBody& d) const {
      w.u32(static_cast<std::uint32_t>(d.boxes.size()));
      for (const Box3D& b : d.boxes) {
        w.u8(static_cast<std::uint8_t>(b.cls));
        for (double v : {b.score, b.cx, b.cy, b.cz, b.length, b.width, b.height, b.yaw})
          w.f32(static_cast<float>(v));
      }
    }
    void operator()(const PointCloudBody& p) const {
      w.u32(static_cast<std::uint32_t>(p.points.size()));
      for (const Point& pt : p.points) {
        for (double v : {pt.x, pt.y, pt.z, pt.intensity}) w.f32(static_cast<float>(v));
      }
    }
    void operator()(const PingBody& b) const { w.u64(b.echo_stamp.ns); }
    void operator()(const PongBody& b) const { w.u64(b.echo_stamp.ns); }
  };
  std::visit(Visitor{w}, body);
}

MessageBody read_body(MsgType type, detail::ByteReader& r) {
  switch (type) {
    case MsgType::metadata: {
      MetadataBody m;
      m.pose.x = r.f64();
      m.pose.y = r.f64();
      m.pose.z = r.f64();
      m.pose.roll = r.f64();
      m.pose.pitch = r.f64();
      m.pose.yaw = r.f64();
      return m;
    }
    case MsgType::intermediate: {
      CompressedFeature cf;
      cf.h = r.u16();
      cf.w = r.u16();
      cf.c_orig = r.u16();
      cf.ratio = r.u16();
      const std::uint8_t elem = r.u8();
      if (elem > 1) throw Error(ErrorKind::format, "unknown element type " + std::to_string(elem));
      cf.elem_type = static_cast<ElemType>(elem);
      cf.quant_scale = r.f32();
      cf.quant_offset = r.f32();
      cf.projection_seed = r.u64();
      if (cf.ratio == 0 || cf.c_orig % cf.ratio != 0) {
        throw Error(ErrorKind::format, "ratio does not divide channel count");
      }
      const std::size_t expect = cf.element_count() * element_size(cf.elem_type);
      if (r.remaining() != expect) {
        throw Error(ErrorKind::format, "intermediate payload is " + std::to_string(r.remaining()) +
                                           " bytes, header implies " + std::to_string(expect));
      }
      const auto bytes = r.bytes(expect);
      cf.payload.assign(bytes.begin(), bytes.end());
      return cf;
    }
    case MsgType::detections: {
      DetectionsBody d;
      const std::uint32_t n = r.u32();
      if (r.remaining() != std::size_t{n} * kBoxBytes) {
        throw Error(ErrorKind::format, "detection count does not match body length");
      }
      d.boxes.resize(n);
      for (Box3D& b : d.boxes) {
        const std::uint8_t cls = r.u8();
        if (cls > 2) throw Error(ErrorKind::format, "unknown class id " + std::to_string(cls));
        b.cls = static_cast<ObjectClass>(cls);
        b.score = r.f32();
        b.cx = r.f32();
        b.cy = r.f32();
        b.cz = r.f32();
        b.length = r.f32();
        b.width = r.f32();
        b.height = r.f32();
        b.yaw = r.f32();
      }
      return d;
    }
    case MsgType::pointcloud: {
      PointCloudBody p;
      const std::uint32_t n = r.u32();
      if (r.remaining() != std::size_t{n} * kPointBytes) {
        throw Error(ErrorKind::format, "point count does not match body length");
      }
      p.points.resize(n);
      for (Point& pt : p.points) {
        pt.x = r.f32();
        pt.y = r.f32();
        pt.z = r.f32();
        pt.intensity = r.f32();
      }
      return p;
    }
    case MsgType::ping: return PingBody{Timestamp{r.u64()}};
    case MsgType::pong: return PongBody{Timestamp{r.u64()}};
  }
  throw Error(ErrorKind::protocol, "unknown message type");
}

}  // namespace

std::vector<std::uint8_t> serialize(const WireMessage& msg) {
  const std::size_t body = body_size(msg.body);
  if (body > 0xFFFF'FFFFull) {
    throw Error(ErrorKind::size, "message body of " + std::to_string(body) +
                                     " bytes exceeds the 32-bit length field");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + body);
  detail::ByteWriter w(out);
  w.bytes(kMagic);
  w.u8(kWireVersion);
  w.u8(static_cast<std::uint8_t>(msg.type()));
  w.u32(msg.agent_id);
  w.u32(msg.seq);
  w.u64(msg.stamp.ns);
  w.u32(static_cast<std::uint32_t>(body));
  write_body(w, msg.body);
  return out;
}

WireMessage deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.bytes(std::min<std::size_t>(4, bytes.size()));
  if (magic.size() < 4 || !std::equal(magic.begin(), magic.end(), kMagic)) {
    throw Error(ErrorKind::protocol, "bad magic");
  }
  const std::uint8_t version = r.u8();
  if (version != kWireVersion) {
    throw Error(ErrorKind::version, "unsupported wire version " + std::to_string(version));
  }
  const std::uint8_t type = r.u8();
  if (type > static_cast<std::uint8_t>(MsgType::pong)) {
    throw Error(ErrorKind::protocol, "unknown message type " + std::to_string(type));
  }
  WireMessage msg;
  msg.agent_id = r.u32();
  msg.seq = r.u32();
  msg.stamp = Timestamp{r.u64()};
  const std::uint32_t body_len = r.u32();
  if (r.remaining() < body_len) {
    throw Error(ErrorKind::truncation, "body_len " + std::to_string(body_len) + " exceeds the " +
                                           std::to_string(r.remaining()) + " remaining bytes");
  }
  if (r.remaining() > body_len) {
    throw Error(ErrorKind::protocol, "trailing bytes after message body");
  }
  detail::ByteReader body(r.bytes(body_len));
  msg.body = read_body(static_cast<MsgType>(type), body);
  if (body.remaining() != 0) {
    throw Error(ErrorKind::format, "body longer than its message kind");
  }
  return msg;
}

std::size_t message_size(const GridSpec& spec, std::size_t ratio, ElemType elem) {
  check_ratio(spec.channels, ratio);
  return kHeaderBytes + kFeatureHeaderBytes +
         spec.cells() * (spec.channels / ratio) * element_size(elem);
}

namespace {

Duration ms(double v) { return Duration::from_ms(v); }

}  // namespace

StageTimings stage_timings(std::string_view profile) {
  if (profile == "paper-encoder") return {ms(0.13), ms(19.19), ms(0.26), ms(0.01)};
  if (profile == "paper-decoder") return {ms(0.27), ms(0.43), ms(0.07), ms(0.01)};
  if (profile == "zero") return {};

  double values[4];
  std::size_t idx = 0;
  std::string_view rest = profile;
  while (idx < 4) {
    const auto comma = rest.find(',');
    const std::string_view field = rest.substr(0, comma);
    const auto res = std::from_chars(field.data(), field.data() + field.size(), values[idx]);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || !(values[idx] >= 0) ||
        !std::isfinite(values[idx])) {
      break;
    }
    ++idx;
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
    if (idx == 4) idx = 5;  // too many fields
  }
  if (idx != 4) {
    throw Error(ErrorKind::config, "unknown stage-timing profile '" + std::string(profile) + "'");
  }
  return {ms(values[0]), ms(values[1]), ms(values[2]), ms(values[3])};
}

}  // namespace v2xl
