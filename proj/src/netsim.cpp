#include "v2xl/netsim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace v2xl {

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::int64_t ms_to_ns(double ms) {
  if (!std::isfinite(ms) || ms * 1e6 >= 9.2e18) return kNever;
  return std::llround(ms * 1e6);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

LinkModel LinkModel::paper_wifi() {
  constexpr double kib = 1024.0, mib = 1024.0 * 1024.0;
  return fit_affine(3.63 * kib, 10.0, 3.7 * mib, 144.2);
}

LinkModel LinkModel::ideal() { return LinkModel{}; }

void LinkModel::validate() const {
  if (!(a_ms >= 0) || !(b_bytes_per_ms > 0) || !(jitter_std_ms >= 0) ||
      !(drop_prob >= 0 && drop_prob <= 1) || !std::isfinite(jitter_std_ms)) {
    throw Error(ErrorKind::config, "link model needs a >= 0, b > 0, jitter >= 0, drop in [0,1]");
  }
}

std::int64_t LinkModel::base_delay_ns(std::size_t bytes) const {
  const std::int64_t fixed = ms_to_ns(a_ms);
  const std::int64_t transfer = ms_to_ns(static_cast<double>(bytes) / b_bytes_per_ms);
  if (fixed == kNever || transfer == kNever || fixed > kNever - transfer) return kNever;
  return fixed + transfer;
}

double channel_delay(std::size_t bytes, const LinkModel& link, Rng* rng) {
  double ms = link.predict_ms(static_cast<double>(bytes));
  if (rng && link.jitter_std_ms > 0) ms = std::max(link.a_ms, ms + rng->normal(0.0, link.jitter_std_ms));
  return ms;
}

LinkModel fit_affine(double size1_bytes, double ms1, double size2_bytes, double ms2) {
  if (size1_bytes == size2_bytes || ms2 <= ms1) {
    throw Error(ErrorKind::config, "affine fit needs two distinct, increasing points");
  }
  const double ms_per_byte = (ms2 - ms1) / (size2_bytes - size1_bytes);
  LinkModel m;
  m.b_bytes_per_ms = 1.0 / ms_per_byte;
  m.a_ms = ms1 - size1_bytes * ms_per_byte;
  return m;
}

LinkModel parse_link_profile(std::string_view text) {
  LinkModel m;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config, "link profile line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    auto number = [&]() {
      double v = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        if (value == "inf") return std::numeric_limits<double>::infinity();
        throw Error(ErrorKind::config, "link profile: bad number for " + key);
      }
      return v;
    };
    if (key == "a_ms") m.a_ms = number();
    else if (key == "b_bytes_per_ms") m.b_bytes_per_ms = number();
    else if (key == "jitter_std_ms") m.jitter_std_ms = number();
    else if (key == "drop_prob") m.drop_prob = number();
    else if (key == "seed") {
      std::uint64_t v = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        throw Error(ErrorKind::config, "link profile: bad seed");
      }
      m.seed = v;
    } else {
      throw Error(ErrorKind::config, "link profile: unknown key '" + key + "'");
    }
  }
  m.validate();
  return m;
}

LinkModel load_link_profile(std::string_view name_or_path) {
  if (name_or_path == "paper-wifi") return LinkModel::paper_wifi();
  if (name_or_path == "ideal") return LinkModel::ideal();
  std::ifstream file{std::string(name_or_path)};
  if (!file) {
    throw Error(ErrorKind::config, "unknown link profile '" + std::string(name_or_path) + "'");
  }
  std::stringstream buf;
  buf << file.rdbuf();
  return parse_link_profile(buf.str());
}

Network::Network(LinkModel default_link) : default_link_(default_link) {
  default_link_.validate();
}

void Network::add_node(NodeId id, Duration clock_offset) {
  nodes_[id] = NodeState{clock_offset, Duration{}, nullptr};
}

void Network::set_handler(NodeId id, Handler handler) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorKind::routing, "unknown node " + std::to_string(id));
  it->second.handler = std::move(handler);
}

Network::Handler Network::handler(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorKind::routing, "unknown node " + std::to_string(id));
  return it->second.handler;
}

void Network::set_default_link(const LinkModel& link) {
  link.validate();
  default_link_ = link;
  link_states_.clear();
}

void Network::set_link(NodeId src, NodeId dst, const LinkModel& link) {
  link.validate();
  link_overrides_[{src, dst}] = link;
  link_states_.erase({src, dst});
}

const LinkModel& Network::link(NodeId src, NodeId dst) const {
  auto it = link_overrides_.find({src, dst});
  return it == link_overrides_.end() ? default_link_ : it->second;
}

void Network::set_stage_timings(MsgType kind, const StageTimings& encoder,
                                const StageTimings& decoder) {
  stages_[static_cast<std::uint8_t>(kind)] = {encoder, decoder};
}

Timestamp Network::local_time(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorKind::routing, "unknown node " + std::to_string(id));
  return now_ + clock_error(id);
}

Duration Network::clock_error(NodeId id) const {
  const auto& n = nodes_.at(id);
  return Duration{n.offset.ns + n.correction.ns};
}

void Network::correct_clock(NodeId id, Duration correction) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorKind::routing, "unknown node " + std::to_string(id));
  it->second.correction.ns += correction.ns;
}

Network::LinkState& Network::link_state(NodeId src, NodeId dst) {
  auto it = link_states_.find({src, dst});
  if (it != link_states_.end()) return it->second;
  const LinkModel& model = link(src, dst);
  const std::uint64_t seed = mix(model.seed ^ mix((std::uint64_t{src} << 32) | dst));
  return link_states_.emplace(std::pair{src, dst}, LinkState{model, Rng(seed)}).first->second;
}

std::optional<Timestamp> Network::send(NodeId src, NodeId dst, const WireMessage& msg) {
  return send_bytes(src, dst, std::make_shared<const std::vector<std::uint8_t>>(serialize(msg)));
}

std::optional<Timestamp> Network::send_bytes(NodeId src, NodeId dst,
                                             std::shared_ptr<const std::vector<std::uint8_t>> bytes) {
  if (!nodes_.contains(src)) throw Error(ErrorKind::routing, "unknown source node " + std::to_string(src));
  if (!nodes_.contains(dst)) throw Error(ErrorKind::routing, "unknown destination node " + std::to_string(dst));

  const std::uint8_t type = bytes->size() > 5 ? (*bytes)[5] : 0;
  const std::size_t size = bytes->size();
  TraceEvent info{TraceKind::send, now_, next_seq_, src, dst, type, size};
  trace_.push_back(info);

  LinkState& ls = link_state(src, dst);
  const LinkModel& m = ls.model;
  const bool dropped = m.drop_prob > 0 && ls.rng.bernoulli(m.drop_prob);
  std::int64_t delay = m.base_delay_ns(size);
  if (!dropped && delay != kNever && m.jitter_std_ms > 0) {
    const std::int64_t jitter = std::llround(ls.rng.normal(0.0, m.jitter_std_ms) * 1e6);
    delay = std::max(ms_to_ns(m.a_ms), delay + jitter);
  }
  if (dropped || delay == kNever) {
    trace_.push_back({TraceKind::drop, now_, next_seq_, src, dst, type, size});
    ++next_seq_;
    return std::nullopt;
  }
  if (auto st = stages_.find(type); st != stages_.end()) {
    delay += st->second.first.total().ns + st->second.second.total().ns;
  }

  Event ev;
  ev.time = now_ + Duration{delay};
  ev.seq = next_seq_++;
  ev.info = TraceEvent{TraceKind::deliver, ev.time, ev.seq, src, dst, type, size};
  Delivery d{src, dst, now_, ev.time, std::move(bytes)};
  ev.action = [this, d = std::move(d)]() {
    const Handler& h = nodes_.at(d.dst).handler;
    if (h) h(d);
  };
  const Timestamp at = ev.time;
  queue_.push(std::move(ev));
  return at;
}

void Network::schedule(Timestamp at, std::function<void()> action) {
  Event ev;
  ev.time = std::max(at, now_);
  ev.seq = next_seq_++;
  ev.info = TraceEvent{TraceKind::timer, ev.time, ev.seq, 0, 0, 0, 0};
  ev.action = std::move(action);
  queue_.push(std::move(ev));
}

void Network::dispatch(Event& ev) {
  now_ = ev.time;
  trace_.push_back(ev.info);
  try {
    ev.action();
  } catch (const std::exception& e) {
    throw Error(ErrorKind::simulation,
                "event #" + std::to_string(ev.seq) + " at t=" + std::to_string(ev.time.ms()) +
                    " ms (" + (ev.info.kind == TraceKind::timer ? "timer" : "delivery " +
                    std::to_string(ev.info.src) + "->" + std::to_string(ev.info.dst)) +
                    ") failed: " + e.what());
  }
}

bool Network::step() {
  if (queue_.empty()) return false;
  Event ev = queue_.top();
  queue_.pop();
  dispatch(ev);
  return true;
}

void Network::run_until(Timestamp t_end) {
  while (!queue_.empty() && queue_.top().time <= t_end) step();
  now_ = std::max(now_, t_end);
}

void Network::run_all() {
  while (step()) {
  }
}

Duration sync_clocks(Network& net, NodeId node, NodeId server, std::size_t rounds) {
  if (!net.has_node(node) || !net.has_node(server)) {
    throw Error(ErrorKind::routing, "sync between unknown nodes");
  }
  const auto node_prev = net.handler(node);
  const auto server_prev = net.handler(server);

  std::optional<std::int64_t> reply_offset;  // (t1 - t0) + (t2 - t3)
  net.set_handler(server, [&](const Delivery& d) {
    const WireMessage msg = deserialize(*d.bytes);
    if (d.src != node || msg.type() != MsgType::ping) {
      if (server_prev) server_prev(d);
      return;
    }
    WireMessage pong{server, msg.seq, net.local_time(server),
                     PongBody{std::get<PingBody>(msg.body).echo_stamp}};
    net.send(server, node, pong);
  });
  net.set_handler(node, [&](const Delivery& d) {
    const WireMessage msg = deserialize(*d.bytes);
    if (d.src != server || msg.type() != MsgType::pong) {
      if (node_prev) node_prev(d);
      return;
    }
    const auto t0 = static_cast<std::int64_t>(std::get<PongBody>(msg.body).echo_stamp.ns);
    const auto t1 = static_cast<std::int64_t>(msg.stamp.ns);
    const auto t3 = static_cast<std::int64_t>(net.local_time(node).ns);
    reply_offset = (t1 - t0) + (t1 - t3);
  });

  std::int64_t sum = 0;
  std::size_t answered = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    reply_offset.reset();
    const Timestamp t0 = net.local_time(node);
    const WireMessage ping{node, static_cast<std::uint32_t>(r), t0, PingBody{t0}};
    net.send(node, server, ping);
    while (!reply_offset && net.step()) {
    }
    if (reply_offset) {
      sum += *reply_offset;
      ++answered;
    }
  }
  net.set_handler(node, node_prev);
  net.set_handler(server, server_prev);
  if (answered == 0) {
    throw Error(ErrorKind::sync_timeout, "no clock-sync exchange between " + std::to_string(node) +
                                             " and " + std::to_string(server) + " completed");
  }
  // Mean of half the per-round sums.
  const auto denom = static_cast<std::int64_t>(2 * answered);
  const std::int64_t q = sum / denom, rem = sum % denom;
  const Duration estimate{q + (2 * rem >= denom ? 1 : (2 * rem <= -denom ? -1 : 0))};
  net.correct_clock(node, estimate);
  return estimate;
}

LatencyStats measure_one_way(Network& net, NodeId a, NodeId b, const WireMessage& msg,
                             std::size_t n) {
  const auto a_prev = net.handler(a);
  const auto b_prev = net.handler(b);
  const auto bytes = std::make_shared<const std::vector<std::uint8_t>>(serialize(msg));

  std::optional<Timestamp> echoed;
  net.set_handler(b, [&](const Delivery& d) {
    if (d.src != a || d.bytes != bytes) {
      if (b_prev) b_prev(d);
      return;
    }
    net.send_bytes(b, a, d.bytes);
  });
  net.set_handler(a, [&](const Delivery& d) {
    if (d.src != b || d.bytes != bytes) {
      if (a_prev) a_prev(d);
      return;
    }
    echoed = net.local_time(a);
  });

  LatencyStats stats;
  stats.message_bytes = bytes->size();
  std::vector<double> one_way;
  for (std::size_t i = 0; i < n; ++i) {
    echoed.reset();
    const Timestamp start = net.local_time(a);
    net.send_bytes(a, b, bytes);
    ++stats.sent;
    while (!echoed && net.step()) {
    }
    if (echoed) one_way.push_back(0.5 * (*echoed - start).ms());
  }
  net.set_handler(a, a_prev);
  net.set_handler(b, b_prev);

  stats.received = one_way.size();
  if (one_way.empty()) {
    throw Error(ErrorKind::measurement, "all " + std::to_string(n) + " round trips were lost");
  }
  double sum = 0;
  for (double v : one_way) sum += v;
  stats.mean_ms = sum / static_cast<double>(one_way.size());
  double sq = 0;
  for (double v : one_way) sq += (v - stats.mean_ms) * (v - stats.mean_ms);
  stats.std_ms = one_way.size() > 1 ? std::sqrt(sq / static_cast<double>(one_way.size() - 1)) : 0.0;
  const auto [mn, mx] = std::minmax_element(one_way.begin(), one_way.end());
  stats.min_ms = *mn;
  stats.max_ms = *mx;
  return stats;
}

WireMessage representative_message(MsgType kind, std::size_t ratio) {
  WireMessage msg;
  switch (kind) {
    case MsgType::metadata: msg.body = MetadataBody{}; break;
    case MsgType::ping: msg.body = PingBody{}; break;
    case MsgType::pong: msg.body = PongBody{}; break;
    case MsgType::detections: {
      // 3.63 KB total.
      const std::size_t target = static_cast<std::size_t>(3.63 * 1024);
      DetectionsBody d;
      d.boxes.resize((target - kHeaderBytes - 4 + kBoxBytes / 2) / kBoxBytes);
      msg.body = std::move(d);
      break;
    }
    case MsgType::pointcloud: {
      const std::size_t target = static_cast<std::size_t>(3.7 * 1024 * 1024);
      PointCloudBody p;
      p.points.resize((target - kHeaderBytes - 4) / kPointBytes);
      msg.body = std::move(p);
      break;
    }
    case MsgType::intermediate: {
      const GridSpec spec;
      check_ratio(spec.channels, ratio);
      CompressedFeature cf;
      cf.h = static_cast<std::uint16_t>(spec.rows());
      cf.w = static_cast<std::uint16_t>(spec.cols());
      cf.c_orig = static_cast<std::uint16_t>(spec.channels);
      cf.ratio = static_cast<std::uint16_t>(ratio);
      cf.payload.assign(cf.element_count() * 4, 0);
      msg.body = std::move(cf);
      break;
    }
  }
  return msg;
}

}  // namespace v2xl
