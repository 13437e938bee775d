#include <algorithm>

#include "cell_ops.hpp"

namespace v2xl::kernels::omp {

namespace {
using Index = std::ptrdiff_t;
}

std::vector<PillarRaw> reduce_pillars(std::span<const PillarEntry> entries) {
  std::vector<PillarEntry> sorted(entries.begin(), entries.end());
  std::sort(sorted.begin(), sorted.end(), detail::entry_less);

  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || sorted[i].cell != sorted[i - 1].cell) starts.push_back(i);
  }
  starts.push_back(sorted.size());

  const auto pillars = static_cast<Index>(starts.size() - 1);
  std::vector<PillarRaw> out(static_cast<std::size_t>(std::max<Index>(pillars, 0)));
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < pillars; ++p) {
    const std::size_t begin = starts[p], end = starts[p + 1];
    PillarRaw raw;
    raw.cell = sorted[begin].cell;
    raw.count = static_cast<std::uint32_t>(end - begin);
    raw.max_z = sorted[end - 1].z;
    for (std::size_t i = begin; i < end; ++i) {
      raw.sum_z += sorted[i].z;
      raw.sum_intensity += sorted[i].intensity;
    }
    out[p] = raw;
  }
  return out;
}

void fill_channels(std::span<const std::uint32_t> cells,
                   std::span<const std::array<double, 4>> stats,
                   std::span<const double> weights, std::span<float> out) {
  const std::size_t channels = weights.size();
  const auto n = static_cast<Index>(cells.size());
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < n; ++p) {
    float* dst = out.data() + static_cast<std::size_t>(cells[p]) * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      dst[c] = static_cast<float>(stats[p][c % 4] * weights[c]);
    }
  }
}

void project(std::span<const float> in, std::size_t channels,
             std::span<const double> basis, std::size_t k, std::span<float> out) {
  const auto cells = static_cast<Index>(channels == 0 ? 0 : in.size() / channels);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < cells; ++i) {
    detail::project_cell(in.data() + i * channels, channels, basis.data(), k,
                         out.data() + i * k);
  }
}

void unproject(std::span<const float> in, std::size_t k,
               std::span<const double> basis, std::size_t channels,
               std::span<float> out) {
  const auto cells = static_cast<Index>(k == 0 ? 0 : in.size() / k);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < cells; ++i) {
    detail::unproject_cell(in.data() + i * k, k, basis.data(), channels,
                           out.data() + i * channels);
  }
}

void elementwise_max(std::span<const std::span<const float>> inputs,
                     std::span<float> out) {
  if (inputs.empty()) return;
  const auto n = static_cast<Index>(out.size());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    float v = inputs[0][i];
    for (std::size_t t = 1; t < inputs.size(); ++t) v = std::max(v, inputs[t][i]);
    out[i] = v;
  }
}

void ego_attention(std::span<const std::span<const float>> inputs,
                   std::size_t channels, std::span<float> out) {
  if (inputs.empty() || channels == 0) return;
  const auto cells = static_cast<Index>(inputs[0].size() / channels);
#pragma omp parallel
  {
    std::vector<double> logits(inputs.size());
#pragma omp for schedule(static)
    for (Index cell = 0; cell < cells; ++cell) {
      detail::attention_cell(inputs, static_cast<std::size_t>(cell), channels,
                             logits.data(), out.data());
    }
  }
}

void warp_nearest(std::span<const float> in, const GridGeometry& geom,
                  const Affine2& to_source, std::span<float> out) {
  const auto rows = static_cast<Index>(geom.h);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < geom.w; ++j) {
      detail::warp_cell(in, geom, to_source, static_cast<std::size_t>(i), j, out.data());
    }
  }
}

}  // namespace v2xl::kernels::omp
