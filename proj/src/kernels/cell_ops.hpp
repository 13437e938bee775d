#pragma once

// Per-cell arithmetic shared by the serial and OpenMP kernels so both produce
// bit-identical output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "v2xl/kernels.hpp"

namespace v2xl::kernels::detail {

inline void project_cell(const float* x, std::size_t channels, const double* basis,
                         std::size_t k, float* y) {
  for (std::size_t j = 0; j < k; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += basis[c * k + j] * x[c];
    y[j] = static_cast<float>(acc);
  }
}

inline void unproject_cell(const float* y, std::size_t k, const double* basis,
                           std::size_t channels, float* x) {
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    const double* row = basis + c * k;
    for (std::size_t j = 0; j < k; ++j) acc += row[j] * y[j];
    x[c] = static_cast<float>(acc);
  }
}

inline void attention_cell(std::span<const std::span<const float>> inputs,
                           std::size_t cell, std::size_t channels, double* logits,
                           float* out) {
  const std::size_t k = inputs.size();
  const float* ego = inputs[0].data() + cell * channels;
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(channels));
  double peak = -INFINITY;
  for (std::size_t t = 0; t < k; ++t) {
    const float* other = inputs[t].data() + cell * channels;
    double dot = 0.0;
    for (std::size_t c = 0; c < channels; ++c) dot += static_cast<double>(ego[c]) * other[c];
    logits[t] = dot * inv_sqrt_c;
    peak = std::max(peak, logits[t]);
  }
  double total = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    logits[t] = std::exp(logits[t] - peak);
    total += logits[t];
  }
  for (std::size_t t = 0; t < k; ++t) logits[t] /= total;
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t t = 0; t < k; ++t) acc += logits[t] * inputs[t][cell * channels + c];
    out[cell * channels + c] = static_cast<float>(acc);
  }
}

inline void warp_cell(std::span<const float> in, const GridGeometry& g,
                      const Affine2& m, std::size_t i, std::size_t j, float* out) {
  const double x = g.x_min + (static_cast<double>(i) + 0.5) * g.voxel;
  const double y = g.y_min + (static_cast<double>(j) + 0.5) * g.voxel;
  const double sx = m.a * x + m.b * y + m.tx;
  const double sy = m.c * x + m.d * y + m.ty;
  const double fi = std::floor((sx - g.x_min) / g.voxel);
  const double fj = std::floor((sy - g.y_min) / g.voxel);
  float* dst = out + (i * g.w + j) * g.channels;
  if (fi < 0 || fj < 0 || fi >= static_cast<double>(g.h) || fj >= static_cast<double>(g.w)) {
    std::fill(dst, dst + g.channels, 0.0f);
    return;
  }
  const auto si = static_cast<std::size_t>(fi);
  const auto sj = static_cast<std::size_t>(fj);
  const float* src = in.data() + (si * g.w + sj) * g.channels;
  std::copy(src, src + g.channels, dst);
}

inline bool entry_less(const PillarEntry& a, const PillarEntry& b) {
  if (a.cell != b.cell) return a.cell < b.cell;
  if (a.z != b.z) return a.z < b.z;
  return a.intensity < b.intensity;
}

}  // namespace v2xl::kernels::detail
