#include "v2xl/rtree.hpp"

#include <algorithm>
#include <cmath>

namespace v2xl {

namespace {

Rect merge(const Rect& a, const Rect& b) {
  return {std::min(a.min_x, b.min_x), std::min(a.min_y, b.min_y),
          std::max(a.max_x, b.max_x), std::max(a.max_y, b.max_y)};
}

double center_x(const Rect& r) { return 0.5 * (r.min_x + r.max_x); }
double center_y(const Rect& r) { return 0.5 * (r.min_y + r.max_y); }

}  // namespace

RTreeIndex::RTreeIndex(std::span<const Rect> rects, std::size_t node_capacity)
    : rects_(rects.begin(), rects.end()), count_(rects.size()) {
  const std::size_t cap = std::max<std::size_t>(node_capacity, 2);
  if (rects_.empty()) return;

  // Each level is a list of (bounds, id) packed into parents of `cap`.
  struct Slot {
    Rect bounds;
    std::uint32_t id;
  };
  std::vector<Slot> level;
  level.reserve(rects_.size());
  for (std::size_t i = 0; i < rects_.size(); ++i) {
    level.push_back({rects_[i], static_cast<std::uint32_t>(i)});
  }

  bool leaf_level = true;
  while (true) {
    const std::size_t n = level.size();
    const std::size_t pages = (n + cap - 1) / cap;
    const auto slices = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(pages))));
    const std::size_t per_slice = slices * cap;

    auto by_x = [](const Slot& a, const Slot& b) {
      const double ax = center_x(a.bounds), bx = center_x(b.bounds);
      return ax != bx ? ax < bx : a.id < b.id;
    };
    auto by_y = [](const Slot& a, const Slot& b) {
      const double ay = center_y(a.bounds), by = center_y(b.bounds);
      return ay != by ? ay < by : a.id < b.id;
    };
    std::sort(level.begin(), level.end(), by_x);
    for (std::size_t s = 0; s < n; s += per_slice) {
      const auto end = level.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + per_slice));
      std::sort(level.begin() + static_cast<std::ptrdiff_t>(s), end, by_y);
    }

    std::vector<Slot> parents;
    for (std::size_t s = 0; s < n; s += per_slice) {
      const std::size_t slice_end = std::min(n, s + per_slice);
      for (std::size_t p = s; p < slice_end; p += cap) {
        Node node;
        node.leaf = leaf_level;
        node.bounds = level[p].bounds;
        for (std::size_t c = p; c < std::min(slice_end, p + cap); ++c) {
          node.bounds = merge(node.bounds, level[c].bounds);
          node.children.push_back(level[c].id);
        }
        parents.push_back({node.bounds, static_cast<std::uint32_t>(nodes_.size())});
        nodes_.push_back(std::move(node));
      }
    }
    ++height_;
    leaf_level = false;
    if (parents.size() == 1) {
      root_ = parents.front().id;
      break;
    }
    level = std::move(parents);
  }
}

std::vector<std::size_t> RTreeIndex::query(const Rect& q) const {
  std::vector<std::size_t> out;
  if (nodes_.empty()) return out;
  std::vector<std::size_t> stack{root_};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!node.bounds.intersects(q)) continue;
    for (std::uint32_t child : node.children) {
      if (node.leaf) {
        if (rects_[child].intersects(q)) out.push_back(child);
      } else {
        stack.push_back(child);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace v2xl
