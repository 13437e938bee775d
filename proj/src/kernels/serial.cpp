#include <algorithm>
#include <map>
#include <utility>

#include "cell_ops.hpp"

namespace v2xl::kernels::serial {

std::vector<PillarRaw> reduce_pillars(std::span<const PillarEntry> entries) {
  std::map<std::uint32_t, std::vector<std::pair<double, double>>> buckets;
  for (const auto& e : entries) buckets[e.cell].emplace_back(e.z, e.intensity);

  std::vector<PillarRaw> out;
  out.reserve(buckets.size());
  for (auto& [cell, pts] : buckets) {
    std::sort(pts.begin(), pts.end());
    PillarRaw raw;
    raw.cell = cell;
    raw.count = static_cast<std::uint32_t>(pts.size());
    raw.max_z = pts.back().first;
    for (const auto& [z, intensity] : pts) {
      raw.sum_z += z;
      raw.sum_intensity += intensity;
    }
    out.push_back(raw);
  }
  return out;
}

void fill_channels(std::span<const std::uint32_t> cells,
                   std::span<const std::array<double, 4>> stats,
                   std::span<const double> weights, std::span<float> out) {
  const std::size_t channels = weights.size();
  for (std::size_t p = 0; p < cells.size(); ++p) {
    float* dst = out.data() + static_cast<std::size_t>(cells[p]) * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      dst[c] = static_cast<float>(stats[p][c % 4] * weights[c]);
    }
  }
}

void project(std::span<const float> in, std::size_t channels,
             std::span<const double> basis, std::size_t k, std::span<float> out) {
  const std::size_t cells = channels == 0 ? 0 : in.size() / channels;
  for (std::size_t i = 0; i < cells; ++i) {
    detail::project_cell(in.data() + i * channels, channels, basis.data(), k,
                         out.data() + i * k);
  }
}

void unproject(std::span<const float> in, std::size_t k,
               std::span<const double> basis, std::size_t channels,
               std::span<float> out) {
  const std::size_t cells = k == 0 ? 0 : in.size() / k;
  for (std::size_t i = 0; i < cells; ++i) {
    detail::unproject_cell(in.data() + i * k, k, basis.data(), channels,
                           out.data() + i * channels);
  }
}

void elementwise_max(std::span<const std::span<const float>> inputs,
                     std::span<float> out) {
  if (inputs.empty()) return;
  std::copy(inputs[0].begin(), inputs[0].end(), out.begin());
  for (std::size_t t = 1; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], inputs[t][i]);
  }
}

void ego_attention(std::span<const std::span<const float>> inputs,
                   std::size_t channels, std::span<float> out) {
  if (inputs.empty() || channels == 0) return;
  const std::size_t cells = inputs[0].size() / channels;
  std::vector<double> logits(inputs.size());
  for (std::size_t cell = 0; cell < cells; ++cell) {
    detail::attention_cell(inputs, cell, channels, logits.data(), out.data());
  }
}

void warp_nearest(std::span<const float> in, const GridGeometry& geom,
                  const Affine2& to_source, std::span<float> out) {
  for (std::size_t i = 0; i < geom.h; ++i) {
    for (std::size_t j = 0; j < geom.w; ++j) {
      detail::warp_cell(in, geom, to_source, i, j, out.data());
    }
  }
}

}  // namespace v2xl::kernels::serial
