#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tcf/kernel_field.hpp"
#include "tcf/tcf_core.hpp"
#include "tcf/types.hpp"

namespace tcf {

enum class ShapeKind {
  Ring2D,
  Quad2D,
  Sine2D,
  SineAF2D,
  Ring3D,
  Quad3D,
  Sine3D,
  VShape3D,
};

int shape_dim(ShapeKind kind);
ShapeKind shape_from_name(const std::string& name);
std::string shape_name(ShapeKind kind);

/// Parameters of the artificial tubular shapes. Defaults reproduce the
/// standard configurations; see synth_field for the center loci.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Ring2D;

  // Ring2D (closed-form radial profile)
  double ring_r = 1.0;
  double ring_m = 0.1;

  // sampled shapes: l samples of the locus parameter over [lo, hi]
  std::optional<int> samples;
  std::optional<double> lo, hi;
  double sine_freq = 1.0;  // Sine2D

  // kernel scale sigma^2 (S = sigma^2 I); default 2 in 2-D, 1 in 3-D
  std::optional<double> sigma2;
};

/// l evenly spaced values covering [a, b], endpoints included.
std::vector<double> make_grid(int l, double a, double b);

using FieldVariant = std::variant<IntensityField<2>, IntensityField<3>>;

FieldVariant synth_field(const ShapeSpec& spec);

/// Rendering grid: kernel bounding box padded by 3 kernel standard
/// deviations, `samples` points per axis.
template <int N>
GridSpec default_grid(const IntensityField<N>& field, int samples) {
  GridSpec grid;
  grid.axes.resize(N);
  if (field.backend() == IntensityField<N>::Backend::AnalyticRing) {
    const auto& rp = field.ring_params();
    const double ext = rp.r + 3.0 * std::sqrt(rp.m / 2.0);
    for (auto& ax : grid.axes) ax = {samples, -ext, ext};
    return grid;
  }
  for (int d = 0; d < N; ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& c : field.centers()) {
      lo = std::min(lo, c(d));
      hi = std::max(hi, c(d));
    }
    double sigma = 0.0;
    for (const auto& S : field.scales()) sigma = std::max(sigma, std::sqrt(S(d, d)));
    grid.axes[d] = {samples, lo - 3.0 * sigma, hi + 3.0 * sigma};
  }
  return grid;
}

GridSpec default_grid(const FieldVariant& field, int samples);

}  // namespace tcf
