#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "tcf/types.hpp"

namespace tcf {

/// Eigen-decomposition of the symmetric log-Hessian with a fixed ordering
/// and sign convention, so identical inputs always give identical frames.
/// Column i of Q is the eigenvector paired with lambdas[i]; lambdas are
/// sorted by ascending magnitude, so column 0 is the tube tangent.
template <int N>
struct EigenFrame {
  Vec<N> lambdas = Vec<N>::Zero();
  Mat<N> Q = Mat<N>::Identity();
  double gap = 0.0;  // min adjacent |lambda| magnitude separation

  Vec<N> tangent() const { return Q.col(0); }

  bool degenerate(double rel = 1e-8) const {
    return gap < rel * std::max(1.0, lambdas.cwiseAbs().maxCoeff());
  }
};

template <int N>
EigenFrame<N> eig_sym_sorted(const Mat<N>& H) {
  if (!H.allFinite()) throw InvalidHessian("eig_sym_sorted: non-finite Hessian");
  Eigen::SelfAdjointEigenSolver<Mat<N>> es;
  es.compute(H);

  // Sort by |lambda| ascending; ties fall back to signed value then
  // solver position, keeping the result a pure function of the bits of H.
  std::array<int, N> order;
  for (int i = 0; i < N; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(es.eigenvalues()(a)), mb = std::abs(es.eigenvalues()(b));
    if (ma != mb) return ma < mb;
    if (es.eigenvalues()(a) != es.eigenvalues()(b))
      return es.eigenvalues()(a) < es.eigenvalues()(b);
    return a < b;
  });

  EigenFrame<N> frame;
  for (int i = 0; i < N; ++i) {
    frame.lambdas(i) = es.eigenvalues()(order[i]);
    Vec<N> q = es.eigenvectors().col(order[i]);
    // Sign convention: the largest-|entry| component is positive.
    int imax = 0;
    for (int j = 1; j < N; ++j)
      if (std::abs(q(j)) > std::abs(q(imax))) imax = j;
    if (q(imax) < 0.0) q = -q;
    frame.Q.col(i) = q;
  }
  frame.gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < N; ++i)
    frame.gap = std::min(frame.gap,
                         std::abs(std::abs(frame.lambdas(i)) - std::abs(frame.lambdas(i + 1))));
  return frame;
}

}  // namespace tcf
