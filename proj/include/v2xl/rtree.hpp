#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "v2xl/core.hpp"

namespace v2xl {

// Static 2D R-tree over axis-aligned rectangles, bulk-loaded with
// Sort-Tile-Recursive packing.
class RTreeIndex {
 public:
  explicit RTreeIndex(std::span<const Rect> rects, std::size_t node_capacity = 8);

  // Indices (into the build span) of every rectangle intersecting `query`,
  // ascending. Touching edges count as intersecting.
  std::vector<std::size_t> query(const Rect& query) const;

  std::size_t size() const { return count_; }
  std::size_t height() const { return height_; }

 private:
  struct Node {
    Rect bounds;
    bool leaf = true;
    std::vector<std::uint32_t> children;  // item indices for leaves, node ids otherwise
  };

  std::vector<Node> nodes_;
  std::vector<Rect> rects_;
  std::size_t root_ = 0;
  std::size_t count_ = 0;
  std::size_t height_ = 0;
};

}  // namespace v2xl
