#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include <Eigen/LU>

#include "tcf/eigensystem.hpp"
#include "tcf/kernel_field.hpp"
#include "tcf/log_jet.hpp"
#include "tcf/types.hpp"

namespace tcf {

// The direction system couples the N(N+1)/2 independent entries of
// T_i = dH/dx_i to the unknown eigenvector derivatives V_i = dQ/dx_i and
// eigenvalue derivatives L_i, plus unit-length and orthogonality rows.
// Unknown order: row 0 of V_i, then L_i, then rows 1..N-1 of V_i.
// Equation order: upper triangle of T_i row-major, N unit rows, then
// orthogonality rows for eigenvector pairs (0,1), (0,2), (1,2), ...
template <int N>
constexpr int system_size() {
  return N * (N + 1);
}

namespace detail {

template <int N>
constexpr int unknown_vi(int row, int col) {  // (V_i)(row, col)
  return row == 0 ? col : (row + 1) * N + col;
}

template <int N>
constexpr int unknown_li(int m) {
  return N + m;
}

}  // namespace detail

/// Solution of one direction system: V_i column j is dq_j/dx_i, L_i holds
/// the eigenvalue derivatives dlambda_j/dx_i.
template <int N>
struct DirectionSolution {
  Mat<N> Vi = Mat<N>::Zero();
  Vec<N> Li = Vec<N>::Zero();
};

/// System matrix M of the direction systems; depends on (Q, Lambda) only.
template <int N>
Eigen::Matrix<double, system_size<N>(), system_size<N>()> assemble_system(
    const EigenFrame<N>& frame) {
  if (frame.degenerate())
    throw DegenerateFrame("assemble_system: repeated eigenvalue magnitudes");
  constexpr int K = system_size<N>();
  Eigen::Matrix<double, K, K> M = Eigen::Matrix<double, K, K>::Zero();
  const Mat<N>& Q = frame.Q;
  const Vec<N>& lam = frame.lambdas;

  int row = 0;
  // Symmetric-T rows: T_i(j,k) = sum_m lam_m (V(j,m) Q(k,m) + Q(j,m) V(k,m))
  //                              + sum_m l_m Q(j,m) Q(k,m)
  for (int j = 0; j < N; ++j)
    for (int k = j; k < N; ++k, ++row)
      for (int m = 0; m < N; ++m) {
        M(row, detail::unknown_vi<N>(j, m)) += lam(m) * Q(k, m);
        M(row, detail::unknown_vi<N>(k, m)) += lam(m) * Q(j, m);
        M(row, detail::unknown_li<N>(m)) += Q(j, m) * Q(k, m);
      }
  // Unit-length rows: q_m . dq_m/dx_i = 0
  for (int m = 0; m < N; ++m, ++row)
    for (int j = 0; j < N; ++j) M(row, detail::unknown_vi<N>(j, m)) = Q(j, m);
  // Orthogonality rows: q_a . dq_b/dx_i + q_b . dq_a/dx_i = 0
  for (int a = 0; a < N; ++a)
    for (int b = a + 1; b < N; ++b, ++row)
      for (int j = 0; j < N; ++j) {
        M(row, detail::unknown_vi<N>(j, b)) += Q(j, a);
        M(row, detail::unknown_vi<N>(j, a)) += Q(j, b);
      }
  return M;
}

/// Right-hand side: upper triangle of T_i row-major, then zeros.
template <int N>
Eigen::Matrix<double, system_size<N>(), 1> flatten_T(const Mat<N>& Ti) {
  Eigen::Matrix<double, system_size<N>(), 1> rhs;
  rhs.setZero();
  int row = 0;
  for (int j = 0; j < N; ++j)
    for (int k = j; k < N; ++k, ++row) rhs(row) = Ti(j, k);
  return rhs;
}

template <int N>
DirectionSolution<N> unpack_direction(
    const Eigen::Matrix<double, system_size<N>(), 1>& x) {
  DirectionSolution<N> sol;
  for (int j = 0; j < N; ++j)
    for (int m = 0; m < N; ++m) sol.Vi(j, m) = x(detail::unknown_vi<N>(j, m));
  for (int m = 0; m < N; ++m) sol.Li(m) = x(detail::unknown_li<N>(m));
  return sol;
}

template <int N>
DirectionSolution<N> solve_direction(
    const Eigen::Matrix<double, system_size<N>(), system_size<N>()>& M,
    const Eigen::Matrix<double, system_size<N>(), 1>& rhs, const EigenFrame<N>&) {
  Eigen::PartialPivLU<Eigen::Matrix<double, system_size<N>(), system_size<N>()>> lu(M);
  if (lu.rcond() < 1e-12)
    throw IllConditionedSystem("solve_direction: direction system is ill conditioned");
  return unpack_direction<N>(lu.solve(rhs));
}

/// All N direction solutions at one point, sharing a single factorization.
template <int N>
std::array<DirectionSolution<N>, N> solve_all_directions(const LogJet<N>& lj,
                                                         const EigenFrame<N>& frame) {
  const auto M = assemble_system<N>(frame);
  Eigen::PartialPivLU<Eigen::Matrix<double, system_size<N>(), system_size<N>()>> lu(M);
  if (lu.rcond() < 1e-12)
    throw IllConditionedSystem("solve_all_directions: direction system is ill conditioned");
  std::array<DirectionSolution<N>, N> sols;
  for (int i = 0; i < N; ++i) sols[i] = unpack_direction<N>(lu.solve(flatten_T<N>(lj.T[i])));
  return sols;
}

/// Jacobian of the tangent eigenvector: column i = dq_1/dx_i.
template <int N>
Mat<N> eigvec_jacobian(const LogJet<N>& lj, const EigenFrame<N>& frame) {
  const auto sols = solve_all_directions<N>(lj, frame);
  Mat<N> J;
  for (int i = 0; i < N; ++i) J.col(i) = sols[i].Vi.col(0);
  return J;
}

enum class StatusCount { kCount };

template <int N>
struct CurvatureResult {
  Vec<N> a = Vec<N>::Zero();  // acceleration
  double c = 0.0;             // curvature = |a|
  Status status = Status::Ok;
  Vec<N> q1 = Vec<N>::Zero();  // tangent at the point (diagnostic)
};

/// Full pointwise pipeline. All failure modes are reported through the
/// status field; eps_p <= 0 disables the low-intensity mask.
template <int N>
CurvatureResult<N> curvature_at(const IntensityField<N>& field, const Vec<N>& x,
                                double eps_p = 0.0) {
  CurvatureResult<N> res;
  DiffJet<N> jet;
  try {
    jet = field.jet(x, 3);
  } catch (const SingularPoint&) {
    res.status = Status::NonFinite;
    return res;
  }
  if (!std::isfinite(jet.value) || !jet.grad.allFinite() || !jet.hess.allFinite()) {
    res.status = Status::NonFinite;
    return res;
  }
  if (eps_p > 0.0 && jet.value < eps_p) {
    res.status = Status::MaskedLowIntensity;
    return res;
  }
  if (!(jet.value > 0.0)) {
    res.status = Status::MaskedLowIntensity;
    return res;
  }
  const LogJet<N> lj = log_jet(jet);
  EigenFrame<N> frame;
  try {
    frame = eig_sym_sorted<N>(lj.H);
  } catch (const InvalidHessian&) {
    res.status = Status::NonFinite;
    return res;
  }
  res.q1 = frame.tangent();
  if (frame.degenerate()) {
    res.status = Status::Degenerate;
    return res;
  }
  Mat<N> J;
  try {
    J = eigvec_jacobian<N>(lj, frame);
  } catch (const IllConditionedSystem&) {
    res.status = Status::Degenerate;
    return res;
  }
  res.a = J * res.q1;
  res.c = res.a.norm();
  if (!std::isfinite(res.c)) {
    res.status = Status::NonFinite;
    res.c = 0.0;
  }
  return res;
}

/// Evaluation lattice: per-axis sample count and closed bounds, in world
/// axis order (x, y[, z]).
struct GridAxis {
  int samples = 2;
  double lo = 0.0, hi = 1.0;
};

struct GridSpec {
  std::vector<GridAxis> axes;

  int dim() const { return static_cast<int>(axes.size()); }
  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& ax : axes) n *= static_cast<std::size_t>(ax.samples);
    return n;
  }
  double coord(int axis, int idx) const {
    const auto& ax = axes[axis];
    if (ax.samples == 1) return ax.lo;
    return ax.lo + (ax.hi - ax.lo) * idx / (ax.samples - 1);
  }
  void validate() const {
    if (axes.empty()) throw InvalidGrid("grid: no axes");
    for (const auto& ax : axes) {
      if (ax.samples < 2) throw InvalidGrid("grid: need at least 2 samples per axis");
      if (!(ax.lo < ax.hi)) throw InvalidGrid("grid: bounds must satisfy lo < hi");
    }
  }
};

/// Curvature sampled over a grid. Storage is x-fastest: flat index
/// ((iz * ny) + iy) * nx + ix, i.e. row-major over reversed axis order.
struct CurvatureField {
  GridSpec grid;
  std::vector<double> values;              // curvature; meaningful when Ok
  std::vector<double> accel;               // optional, dim() doubles per point
  std::vector<Status> status;

  std::size_t size() const { return values.size(); }
  int dim() const { return grid.dim(); }
  std::size_t count(Status s) const {
    std::size_t n = 0;
    for (Status st : status) n += (st == s);
    return n;
  }
};

struct ComputeOptions {
  double mask_rel = 1e-3;  // epsilon_p as a fraction of the grid max intensity
  bool store_accel = false;
  int workers = 0;  // 0 = hardware concurrency
};

namespace detail {

template <typename Body>
void parallel_indexed(std::size_t n, int workers, const Body& body) {
  int w = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  if (w < 1) w = 1;
  if (w == 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  constexpr std::size_t chunk = 256;
  auto run = [&]() {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      const std::size_t end = std::min(begin + chunk, n);
      for (std::size_t i = begin; i < end; ++i) body(i);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < w; ++t) pool.emplace_back(run);
  for (auto& th : pool) th.join();
}

}  // namespace detail

template <int N>
Vec<N> grid_point(const GridSpec& grid, std::size_t flat) {
  Vec<N> x;
  for (int axis = 0; axis < N; ++axis) {
    const int l = grid.axes[axis].samples;
    x(axis) = grid.coord(axis, static_cast<int>(flat % l));
    flat /= l;
  }
  return x;
}

/// Grid evaluation; output arrays are position-indexed, so the result is
/// identical for any worker count.
template <int N>
CurvatureField curvature_field(const IntensityField<N>& field, const GridSpec& grid,
                               const ComputeOptions& opts = {}) {
  grid.validate();
  if (grid.dim() != N) throw InvalidGrid("curvature_field: grid/field dimension mismatch");
  const std::size_t n = grid.size();

  // Pass 1: grid max intensity, for the relative mask threshold.
  double eps_p = 0.0;
  if (opts.mask_rel > 0.0) {
    std::vector<double> vals(n);
    detail::parallel_indexed(n, opts.workers, [&](std::size_t i) {
      try {
        vals[i] = field.jet(grid_point<N>(grid, i), 0).value;
      } catch (const SingularPoint&) {
        vals[i] = 0.0;
      }
    });
    double maxp = 0.0;
    for (double v : vals) maxp = std::max(maxp, v);
    eps_p = opts.mask_rel * maxp;
  }

  CurvatureField out;
  out.grid = grid;
  out.values.assign(n, 0.0);
  out.status.assign(n, Status::Ok);
  if (opts.store_accel) out.accel.assign(n * N, 0.0);

  detail::parallel_indexed(n, opts.workers, [&](std::size_t i) {
    const CurvatureResult<N> r = curvature_at<N>(field, grid_point<N>(grid, i), eps_p);
    out.values[i] = r.c;
    out.status[i] = r.status;
    if (opts.store_accel)
      for (int d = 0; d < N; ++d) out.accel[i * N + d] = r.a(d);
  });
  return out;
}

}  // namespace tcf
