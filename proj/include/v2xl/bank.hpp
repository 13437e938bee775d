#pragma once

// Receiver-side buffer of decoded collaborator artifacts, indexed by sender
// and message kind, queried by freshness window.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <utility>
#include <variant>
#include <vector>

#include "v2xl/core.hpp"
#include "v2xl/pillar.hpp"
#include "v2xl/txcodec.hpp"

namespace v2xl {

template <typename Payload>
struct BankEntry {
  Timestamp stamp;
  Payload payload;
};

// Per (sender, kind) sorted ring of at most `capacity` entries. Insert and
// query may be called from any thread.
template <typename Payload>
class TimedBank {
 public:
  using Entry = BankEntry<Payload>;

  explicit TimedBank(std::size_t capacity = 10) : capacity_(capacity == 0 ? 1 : capacity) {}

  std::size_t capacity() const { return capacity_; }

  // Sorted insert; an equal stamp replaces the stored payload. The oldest
  // entry is evicted when over capacity.
  void insert(std::uint32_t sender, MsgType kind, Timestamp stamp, Payload payload) {
    std::unique_lock lock(mutex_);
    auto& ring = rings_[{sender, kind}];
    auto it = std::lower_bound(ring.begin(), ring.end(), stamp,
                               [](const Entry& e, Timestamp t) { return e.stamp < t; });
    if (it != ring.end() && it->stamp == stamp) {
      it->payload = std::move(payload);
      return;
    }
    ring.insert(it, Entry{stamp, std::move(payload)});
    if (ring.size() > capacity_) ring.erase(ring.begin());
  }

  // Entry with the largest stamp in [now - window, now], both ends closed.
  std::optional<Entry> query_latest(std::uint32_t sender, MsgType kind, Timestamp now,
                                    Duration window) const {
    std::shared_lock lock(mutex_);
    auto found = rings_.find({sender, kind});
    if (found == rings_.end()) return std::nullopt;
    return latest_in(found->second, now, window);
  }

  // query_latest for every sender holding `kind`; stale senders are omitted.
  std::map<std::uint32_t, Entry> query_all_latest(MsgType kind, Timestamp now,
                                                  Duration window) const {
    std::shared_lock lock(mutex_);
    std::map<std::uint32_t, Entry> out;
    for (const auto& [key, ring] : rings_) {
      if (key.second != kind) continue;
      if (auto e = latest_in(ring, now, window)) out.emplace(key.first, std::move(*e));
    }
    return out;
  }

  std::size_t size(std::uint32_t sender, MsgType kind) const {
    std::shared_lock lock(mutex_);
    auto found = rings_.find({sender, kind});
    return found == rings_.end() ? 0 : found->second.size();
  }

  // Stamps held for one sender and kind, ascending.
  std::vector<Timestamp> stamps(std::uint32_t sender, MsgType kind) const {
    std::shared_lock lock(mutex_);
    std::vector<Timestamp> out;
    if (auto found = rings_.find({sender, kind}); found != rings_.end()) {
      for (const auto& e : found->second) out.push_back(e.stamp);
    }
    return out;
  }

  void clear() {
    std::unique_lock lock(mutex_);
    rings_.clear();
  }

 private:
  static std::optional<Entry> latest_in(const std::vector<Entry>& ring, Timestamp now,
                                        Duration window) {
    auto it = std::upper_bound(ring.begin(), ring.end(), now,
                               [](Timestamp t, const Entry& e) { return t < e.stamp; });
    if (it == ring.begin()) return std::nullopt;
    --it;
    const Timestamp oldest = window.is_infinite() ? Timestamp{0} : now - window;
    if (it->stamp < oldest) return std::nullopt;
    return *it;
  }

  std::size_t capacity_;
  mutable std::shared_mutex mutex_;
  std::map<std::pair<std::uint32_t, MsgType>, std::vector<Entry>> rings_;
};

// What the pipeline stores after decoding: poses, restored feature grids,
// detections and projected clouds. Shared pointers keep queries cheap.
using BankPayload = std::variant<Pose, std::shared_ptr<const BEVFeatureGrid>,
                                 std::shared_ptr<const DetectionSet>,
                                 std::shared_ptr<const PointCloud>>;

class FeatureBank : public TimedBank<BankPayload> {
 public:
  static constexpr Duration kDefaultWindow{100'000'000};  // 100 ms

  explicit FeatureBank(std::size_t capacity = 10) : TimedBank(capacity) {}
};

}  // namespace v2xl
