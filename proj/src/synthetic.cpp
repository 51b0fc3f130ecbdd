#include "tcf/synthetic.hpp"

#include <cmath>

namespace tcf {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct ShapeNameEntry {
  const char* name;
  ShapeKind kind;
};

constexpr ShapeNameEntry kShapeNames[] = {
    {"ring2d", ShapeKind::Ring2D},   {"quad2d", ShapeKind::Quad2D},
    {"sine2d", ShapeKind::Sine2D},   {"sineaf2d", ShapeKind::SineAF2D},
    {"ring3d", ShapeKind::Ring3D},   {"quad3d", ShapeKind::Quad3D},
    {"sine3d", ShapeKind::Sine3D},   {"vshape3d", ShapeKind::VShape3D},
};

}  // namespace

int shape_dim(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Ring2D:
    case ShapeKind::Quad2D:
    case ShapeKind::Sine2D:
    case ShapeKind::SineAF2D:
      return 2;
    default:
      return 3;
  }
}

ShapeKind shape_from_name(const std::string& name) {
  for (const auto& e : kShapeNames)
    if (name == e.name) return e.kind;
  throw InvalidShape("unknown shape: " + name);
}

std::string shape_name(ShapeKind kind) {
  for (const auto& e : kShapeNames)
    if (kind == e.kind) return e.name;
  return "?";
}

std::vector<double> make_grid(int l, double a, double b) {
  if (l < 2) throw InvalidGrid("make_grid: need at least 2 samples");
  if (!(a < b)) throw InvalidGrid("make_grid: interval must satisfy a < b");
  std::vector<double> g(l);
  for (int i = 0; i < l; ++i) g[i] = a + (b - a) * i / (l - 1);
  return g;
}

FieldVariant synth_field(const ShapeSpec& spec) {
  const int dim = shape_dim(spec.kind);
  const double sigma2 = spec.sigma2.value_or(dim == 2 ? 2.0 : 1.0);
  if (!(sigma2 > 0.0)) throw InvalidShape("synth_field: sigma2 must be positive");

  auto param_grid = [&](int def_l, double def_lo, double def_hi) {
    return make_grid(spec.samples.value_or(def_l), spec.lo.value_or(def_lo),
                     spec.hi.value_or(def_hi));
  };

  switch (spec.kind) {
    case ShapeKind::Ring2D:
      return IntensityField<2>::analytic_ring(spec.ring_r, spec.ring_m);

    case ShapeKind::Quad2D: {
      std::vector<Vec<2>> centers;
      for (double m : param_grid(20, -1.5, 1.5)) centers.push_back({m, m * m});
      return IntensityField<2>::gaussian_mixture(
          std::move(centers), std::vector<double>(20, 1.0), sigma2);
    }

    case ShapeKind::Sine2D: {
      std::vector<Vec<2>> centers;
      const auto ms = param_grid(50, -kPi, kPi);
      for (double m : ms) centers.push_back({m, std::sin(spec.sine_freq * m)});
      return IntensityField<2>::gaussian_mixture(
          std::move(centers), std::vector<double>(ms.size(), 1.0), sigma2);
    }

    case ShapeKind::SineAF2D: {
      // First 25 samples (m <= 0): A=1, f=2; remaining: A=3, f=1.
      std::vector<Vec<2>> centers;
      const auto ms = param_grid(50, -2.0 * kPi, 2.0 * kPi);
      for (std::size_t j = 0; j < ms.size(); ++j) {
        const bool first = j < ms.size() / 2;
        const double A = first ? 1.0 : 3.0;
        const double f = first ? 2.0 : 1.0;
        centers.push_back({ms[j], A * std::sin(f * ms[j])});
      }
      return IntensityField<2>::gaussian_mixture(
          std::move(centers), std::vector<double>(ms.size(), 1.0), sigma2);
    }

    case ShapeKind::Ring3D: {
      const double r = 2.0;
      std::vector<Vec<3>> centers;
      const auto thetas = param_grid(40, 0.0, 2.0 * kPi);
      for (double th : thetas)
        centers.push_back({r * std::sin(th), r * std::cos(th), std::sin(r)});
      return IntensityField<3>::gaussian_mixture(
          std::move(centers), std::vector<double>(thetas.size(), 1.0), sigma2);
    }

    case ShapeKind::Quad3D: {
      std::vector<Vec<3>> centers;
      const auto ms = param_grid(30, -1.25, 1.25);
      for (double m : ms) centers.push_back({m, m, m * m});
      return IntensityField<3>::gaussian_mixture(
          std::move(centers), std::vector<double>(ms.size(), 1.0), sigma2);
    }

    case ShapeKind::Sine3D: {
      std::vector<Vec<3>> centers;
      const auto ms = param_grid(40, -kPi, kPi);
      for (double m : ms) centers.push_back({m, m, std::sin(m)});
      return IntensityField<3>::gaussian_mixture(
          std::move(centers), std::vector<double>(ms.size(), 1.0), sigma2);
    }

    case ShapeKind::VShape3D: {
      std::vector<Vec<3>> centers;
      const auto ms = param_grid(20, -1.0, 1.0);
      for (double m : ms) centers.push_back({m, m, std::abs(m)});
      return IntensityField<3>::gaussian_mixture(
          std::move(centers), std::vector<double>(ms.size(), 1.0), sigma2);
    }
  }
  throw InvalidShape("synth_field: unhandled shape kind");
}

GridSpec default_grid(const FieldVariant& field, int samples) {
  return std::visit([&](const auto& f) { return default_grid(f, samples); }, field);
}

}  // namespace tcf
