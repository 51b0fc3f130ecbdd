#pragma once

#include <cmath>
#include <vector>

#include "tcf/eigensystem.hpp"
#include "tcf/kernel_field.hpp"
#include "tcf/log_jet.hpp"
#include "tcf/types.hpp"

namespace tcf::oracle {

/// Tangent eigenvector of the log-Hessian at x, via the regular pipeline.
template <int N>
Vec<N> tangent_at(const IntensityField<N>& field, const Vec<N>& x) {
  return eig_sym_sorted<N>(log_jet(field.jet(x, 2)).H).tangent();
}

/// Central-difference Jacobian of q1, columns sign-aligned to q1(x).
/// Independent of the linear-system solution path.
template <int N>
Mat<N> fd_eigvec_jacobian(const IntensityField<N>& field, const Vec<N>& x, double eps) {
  const Vec<N> q0 = tangent_at(field, x);
  Mat<N> J;
  for (int i = 0; i < N; ++i) {
    Vec<N> xp = x, xm = x;
    xp(i) += eps;
    xm(i) -= eps;
    Vec<N> qp = tangent_at(field, xp);
    Vec<N> qm = tangent_at(field, xm);
    if (std::abs(qp.dot(q0)) < 0.5 || std::abs(qm.dot(q0)) < 0.5)
      throw OracleUnstable("fd_eigvec_jacobian: eigenvector branch lost near x");
    if (qp.dot(q0) < 0.0) qp = -qp;
    if (qm.dot(q0) < 0.0) qm = -qm;
    J.col(i) = (qp - qm) / (2.0 * eps);
  }
  return J;
}

template <int N>
struct TracedCurve {
  std::vector<Vec<N>> points;
  double step = 0.0;
  bool truncated = false;  // left the unmasked region before nsteps
};

/// RK4 integration of x' = q1(x), tangent sign-aligned step to step.
/// dir0 picks the initial branch (defaults to the pipeline sign of q1).
template <int N>
TracedCurve<N> trace_parallel_curve(const IntensityField<N>& field, const Vec<N>& x0, double h,
                                    int nsteps, double min_value = 0.0,
                                    const Vec<N>* dir0 = nullptr) {
  TracedCurve<N> curve;
  curve.step = h;
  curve.points.push_back(x0);
  Vec<N> prev = dir0 ? dir0->normalized() : tangent_at(field, x0);

  auto dir = [&](const Vec<N>& x, const Vec<N>& align) {
    Vec<N> q = tangent_at(field, x);
    if (std::abs(q.dot(align)) < 0.5)
      throw OracleUnstable("trace_parallel_curve: tangent branch lost");
    return q.dot(align) < 0.0 ? Vec<N>(-q) : q;
  };

  Vec<N> x = x0;
  for (int s = 0; s < nsteps; ++s) {
    try {
      if (min_value > 0.0 && field.jet(x, 0).value < min_value) {
        curve.truncated = true;
        break;
      }
      const Vec<N> k1 = dir(x, prev);
      const Vec<N> k2 = dir(x + 0.5 * h * k1, k1);
      const Vec<N> k3 = dir(x + 0.5 * h * k2, k1);
      const Vec<N> k4 = dir(x + h * k3, k1);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      prev = k1;
    } catch (const OracleUnstable&) {
      curve.truncated = true;
      break;
    } catch (const SingularPoint&) {
      curve.truncated = true;
      break;
    }
    curve.points.push_back(x);
  }
  return curve;
}

/// Reciprocal circumradius of (p[i-1], p[i], p[i+1]); 0 for collinear triples.
template <int N>
double polyline_curvature(const TracedCurve<N>& curve, int i) {
  if (i < 1 || i + 1 >= static_cast<int>(curve.points.size()))
    throw Error("polyline_curvature: index out of range");
  const Vec<N>& a = curve.points[i - 1];
  const Vec<N>& b = curve.points[i];
  const Vec<N>& c = curve.points[i + 1];
  const double ab = (b - a).norm(), bc = (c - b).norm(), ca = (a - c).norm();
  if (ab < 1e-14 || bc < 1e-14 || ca < 1e-14)
    throw OracleUnstable("polyline_curvature: duplicate points");
  // 1/R = 4 * triangle area / (|ab| |bc| |ca|)
  double area;
  if constexpr (N == 2) {
    area = 0.5 * std::abs((b - a)(0) * (c - a)(1) - (b - a)(1) * (c - a)(0));
  } else {
    area = 0.5 * (b - a).template head<3>().cross((c - a).template head<3>()).norm();
  }
  return 4.0 * area / (ab * bc * ca);
}

/// Curvature at x from a short parallel-curve trace through x: integrate
/// half a window in each tangent direction, then fit the circumcircle of
/// the two endpoints and x itself.
template <int N>
double traced_curvature(const IntensityField<N>& field, const Vec<N>& x, double h = 1e-3,
                        int half_steps = 25) {
  const Vec<N> q0 = tangent_at(field, x);
  const Vec<N> q0r = -q0;
  const auto fwd = trace_parallel_curve(field, x, h, half_steps, 0.0, &q0);
  const auto bwd = trace_parallel_curve(field, x, h, half_steps, 0.0, &q0r);
  if (fwd.truncated || bwd.truncated ||
      static_cast<int>(fwd.points.size()) <= half_steps ||
      static_cast<int>(bwd.points.size()) <= half_steps)
    throw OracleUnstable("traced_curvature: trace left the stable region");
  TracedCurve<N> triple;
  triple.points = {bwd.points.back(), x, fwd.points.back()};
  return polyline_curvature(triple, 1);
}

}  // namespace tcf::oracle
