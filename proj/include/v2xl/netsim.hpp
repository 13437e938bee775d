#pragma once

// Deterministic discrete-event network: affine-latency links, per-node clock
// offsets, NTP-style synchronization and round-trip latency measurement.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "v2xl/core.hpp"
#include "v2xl/rng.hpp"
#include "v2xl/txcodec.hpp"

namespace v2xl {

// delay = a + size / b + N(0, jitter_std), never below a.
struct LinkModel {
  double a_ms = 0.0;
  double b_bytes_per_ms = INFINITY;
  double jitter_std_ms = 0.0;
  double drop_prob = 0.0;
  std::uint64_t seed = 0;

  // Affine fit through the detection-output and LiDAR rows of the Wi-Fi
  // measurements (3.63 KB -> 10.0 ms, 3.7 MB -> 144.2 ms, 1024-based units).
  static LinkModel paper_wifi();
  static LinkModel ideal();

  void validate() const;
  // a + bytes / b in milliseconds, without jitter.
  double predict_ms(double bytes) const { return a_ms + bytes / b_bytes_per_ms; }
  // Deterministic part of the delay, nanoseconds; INT64_MAX when a is infinite.
  std::int64_t base_delay_ns(std::size_t bytes) const;
};

// Deterministic delay in milliseconds, plus jitter drawn from `rng` if given.
double channel_delay(std::size_t bytes, const LinkModel& link, Rng* rng = nullptr);

// Two-point fit of a + size / b through (size1, ms1) and (size2, ms2).
LinkModel fit_affine(double size1_bytes, double ms1, double size2_bytes, double ms2);

// Builtin names "paper-wifi" and "ideal", otherwise a key=value file with
// keys a_ms, b_bytes_per_ms, jitter_std_ms, drop_prob, seed. '#' starts a
// comment. Throws config / io.
LinkModel load_link_profile(std::string_view name_or_path);
LinkModel parse_link_profile(std::string_view text);

using NodeId = std::uint32_t;

struct Delivery {
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp sent;       // true time
  Timestamp delivered;  // true time
  std::shared_ptr<const std::vector<std::uint8_t>> bytes;
};

enum class TraceKind : std::uint8_t { send, drop, deliver, timer };

struct TraceEvent {
  TraceKind kind = TraceKind::send;
  Timestamp time;
  std::uint64_t seq = 0;
  NodeId src = 0, dst = 0;
  std::uint8_t msg_type = 0;
  std::size_t bytes = 0;

  bool operator==(const TraceEvent&) const = default;
};

class Network {
 public:
  using Handler = std::function<void(const Delivery&)>;

  explicit Network(LinkModel default_link = LinkModel::ideal());

  // Node-visible time = true time + offset + accumulated corrections.
  void add_node(NodeId id, Duration clock_offset = {});
  bool has_node(NodeId id) const { return nodes_.contains(id); }
  void set_handler(NodeId id, Handler handler);
  Handler handler(NodeId id) const;

  void set_default_link(const LinkModel& link);
  void set_link(NodeId src, NodeId dst, const LinkModel& link);
  const LinkModel& link(NodeId src, NodeId dst) const;

  // Encoder/decoder cost charged on every message of `kind`.
  void set_stage_timings(MsgType kind, const StageTimings& encoder, const StageTimings& decoder);

  Timestamp now() const { return now_; }
  Timestamp local_time(NodeId id) const;
  Duration clock_error(NodeId id) const;  // local - true
  void correct_clock(NodeId id, Duration correction);

  // Returns the scheduled true delivery time, or nullopt when dropped.
  std::optional<Timestamp> send(NodeId src, NodeId dst, const WireMessage& msg);
  std::optional<Timestamp> send_bytes(NodeId src, NodeId dst,
                                      std::shared_ptr<const std::vector<std::uint8_t>> bytes);

  // Runs `action` at true time `at` (not before now).
  void schedule(Timestamp at, std::function<void()> action);

  // Processes every event with time <= t_end in (time, sequence) order and
  // leaves the clock at t_end. A throwing handler surfaces as a simulation
  // error naming the event.
  void run_until(Timestamp t_end);
  // Processes a single event; false when the queue is empty.
  bool step();
  void run_all();

  std::size_t pending() const { return queue_.size(); }
  const std::vector<TraceEvent>& trace() const { return trace_; }

 private:
  struct Event {
    Timestamp time;
    std::uint64_t seq;
    std::function<void()> action;
    TraceEvent info;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  struct NodeState {
    Duration offset;
    Duration correction;
    Handler handler;
  };
  struct LinkState {
    LinkModel model;
    Rng rng;
  };

  LinkState& link_state(NodeId src, NodeId dst);
  void dispatch(Event& ev);

  LinkModel default_link_;
  std::map<NodeId, NodeState> nodes_;
  std::map<std::pair<NodeId, NodeId>, LinkModel> link_overrides_;
  std::map<std::pair<NodeId, NodeId>, LinkState> link_states_;
  std::map<std::uint8_t, std::pair<StageTimings, StageTimings>> stages_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<TraceEvent> trace_;
  Timestamp now_;
  std::uint64_t next_seq_ = 0;
};

// One NTP exchange per round: t0 node send, t1 = t2 server receive/reply,
// t3 node receive (each on its own clock); offset = ((t1-t0) + (t2-t3)) / 2,
// i.e. server clock minus node clock. The mean over `rounds` is applied to the
// node's clock and returned. Throws sync_timeout if every exchange is lost.
Duration sync_clocks(Network& net, NodeId node, NodeId server, std::size_t rounds = 1);

struct LatencyStats {
  std::size_t sent = 0;
  std::size_t received = 0;
  std::size_t message_bytes = 0;
  double mean_ms = 0, std_ms = 0, min_ms = 0, max_ms = 0;
};

// n sequential round trips of `msg` from a to b, echoed back byte-for-byte;
// statistics of RTT / 2 measured on a's clock. Throws measurement when all n
// are lost.
LatencyStats measure_one_way(Network& net, NodeId a, NodeId b, const WireMessage& msg,
                             std::size_t n);

// Message of the given kind sized like the field measurements: detections
// ~3.63 KB, point cloud ~3.7 MB, intermediate = default grid at `ratio`.
WireMessage representative_message(MsgType kind, std::size_t ratio = 32);

}  // namespace v2xl
