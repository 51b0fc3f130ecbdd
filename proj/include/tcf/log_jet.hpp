#pragma once

#include <cmath>

#include "tcf/kernel_field.hpp"
#include "tcf/types.hpp"

namespace tcf {

/// Derivatives of f = log p at a point: gradient g, Hessian H, and the
/// directional Hessian derivatives T[i] = dH/dx_i.
template <int N>
struct LogJet {
  Vec<N> g = Vec<N>::Zero();
  Mat<N> H = Mat<N>::Zero();
  std::array<Mat<N>, N> T{};

  LogJet() {
    for (auto& t : T) t.setZero();
  }
};

/// g = grad p / p,  H = hess p / p - g g',
/// T_i = third(.,.,i)/p - (hess dp_i + d(grad)_i grad' + grad d(grad')_i)/p^2
///       + 2 grad grad' dp_i / p^3.
template <int N>
LogJet<N> log_jet(const DiffJet<N>& jet) {
  if (!(jet.value > 0.0)) throw Error("log_jet: field value must be positive");
  const double p = jet.value;
  LogJet<N> lj;
  lj.g = jet.grad / p;
  lj.H = jet.hess / p - lj.g * lj.g.transpose();
  for (int i = 0; i < N; ++i) {
    const double dp = jet.grad(i);
    const Vec<N> dgrad = jet.hess.col(i);  // d(grad p)/dx_i
    Mat<N> Ti = jet.third[i] / p -
                (jet.hess * dp + dgrad * jet.grad.transpose() + jet.grad * dgrad.transpose()) /
                    (p * p) +
                2.0 * dp / (p * p * p) * jet.grad * jet.grad.transpose();
    lj.T[i] = (Ti + Ti.transpose()) * 0.5;
  }
  lj.H = ((lj.H + lj.H.transpose()) * 0.5).eval();
  return lj;
}

}  // namespace tcf
