#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "tcf/types.hpp"

namespace tcf {

/// Value and derivatives of a scalar field at one point, up to third order.
/// third[i](j,k) = d hess(j,k) / d x_i; symmetric under any index permutation.
template <int N>
struct DiffJet {
  double value = 0.0;
  Vec<N> grad = Vec<N>::Zero();
  Mat<N> hess = Mat<N>::Zero();
  std::array<Mat<N>, N> third{};

  DiffJet() {
    for (auto& t : third) t.setZero();
  }
};

namespace detail {

// Full index-averaging over the 6 permutations of (i,j,k). One canonical
// average is computed per unordered triple and written to every slot, so
// the result is symmetric to the last bit.
template <int N>
void symmetrize_third(std::array<Mat<N>, N>& t) {
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j)
      for (int k = j; k < N; ++k) {
        const double avg = (t[i](j, k) + t[i](k, j) + t[j](i, k) + t[j](k, i) +
                            t[k](i, j) + t[k](j, i)) /
                           6.0;
        t[i](j, k) = t[i](k, j) = t[j](i, k) = t[j](k, i) = t[k](i, j) = t[k](j, i) = avg;
      }
}

}  // namespace detail

/// Jet of the unnormalized Gaussian K_S(u) = exp(-u'S^{-1}u/2).
/// Orders above `order` are left zero.
template <int N>
DiffJet<N> gaussian_kernel_jet(const Vec<N>& u, const Mat<N>& S, int order = 3) {
  if (order < 0 || order > 3) throw Error("gaussian_kernel_jet: order must be in 0..3");
  Eigen::LLT<Mat<N>> llt(S);
  if (llt.info() != Eigen::Success)
    throw InvalidScale("gaussian_kernel_jet: scale matrix is not SPD");
  const Mat<N> A = llt.solve(Mat<N>::Identity());

  DiffJet<N> jet;
  const Vec<N> b = A * u;  // S^{-1} u
  jet.value = std::exp(-0.5 * u.dot(b));
  if (order >= 1) jet.grad = -jet.value * b;
  if (order >= 2) jet.hess = jet.value * (b * b.transpose() - A);
  if (order >= 3) {
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k)
          jet.third[i](j, k) =
              jet.value * (-b(i) * b(j) * b(k) + A(i, j) * b(k) + A(i, k) * b(j) + A(j, k) * b(i));
  }
  return jet;
}

/// Continuous positive intensity function p(x) with analytic derivatives.
/// Immutable after construction; all evaluation methods are const and
/// safe to call concurrently.
template <int N>
class IntensityField {
 public:
  enum class Backend { GaussianMixture, AnalyticRing };

  struct RingParams {
    double r = 1.0;  // ridge radius
    double m = 0.1;  // radial variance of the profile
  };

  static IntensityField gaussian_mixture(std::vector<Vec<N>> centers,
                                         std::vector<double> weights,
                                         std::vector<Mat<N>> scales,
                                         std::optional<int> knn_k = std::nullopt) {
    IntensityField f;
    f.backend_ = Backend::GaussianMixture;
    f.centers_ = std::move(centers);
    f.weights_ = std::move(weights);
    f.scales_ = std::move(scales);
    if (f.centers_.empty()) throw EmptyField("gaussian_mixture: no kernel centers");
    if (f.weights_.size() != f.centers_.size() || f.scales_.size() != f.centers_.size())
      throw Error("gaussian_mixture: centers/weights/scales size mismatch");
    for (double w : f.weights_)
      if (!(w > 0.0)) throw Error("gaussian_mixture: weights must be positive");
    f.inv_scales_.reserve(f.scales_.size());
    for (const auto& S : f.scales_) {
      Eigen::LLT<Mat<N>> llt(S);
      if (llt.info() != Eigen::Success)
        throw InvalidScale("gaussian_mixture: scale matrix is not SPD");
      f.inv_scales_.push_back(llt.solve(Mat<N>::Identity()));
    }
    if (knn_k) {
      if (*knn_k < 1 || *knn_k > static_cast<int>(f.centers_.size()))
        throw InvalidK("gaussian_mixture: knn_k out of range");
      f.knn_k_ = knn_k;
    }
    if (f.centers_.size() >= kKdTreeThreshold) f.build_kdtree();
    return f;
  }

  /// Uniform isotropic scale for every kernel.
  static IntensityField gaussian_mixture(std::vector<Vec<N>> centers,
                                         std::vector<double> weights, double sigma2,
                                         std::optional<int> knn_k = std::nullopt) {
    std::vector<Mat<N>> scales(centers.size(), Mat<N>(sigma2 * Mat<N>::Identity()));
    return gaussian_mixture(std::move(centers), std::move(weights), std::move(scales), knn_k);
  }

  /// Closed-form blurry ring p(x) = exp(-(|x|-r)^2/m); 2-D only.
  static IntensityField analytic_ring(double r, double m) {
    static_assert(N == 2, "analytic ring is a 2-D backend");
    if (!(r > 0.0) || !(m > 0.0)) throw InvalidShape("analytic_ring: r and m must be positive");
    IntensityField f;
    f.backend_ = Backend::AnalyticRing;
    f.ring_ = RingParams{r, m};
    return f;
  }

  Backend backend() const { return backend_; }
  int dim() const { return N; }
  const std::vector<Vec<N>>& centers() const { return centers_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Mat<N>>& scales() const { return scales_; }
  std::optional<int> knn_k() const { return knn_k_; }
  const RingParams& ring_params() const { return ring_; }

  /// Indices of the k centers nearest to x, ascending (distance, index).
  std::vector<int> knn_select(const Vec<N>& x, int k) const {
    if (backend_ != Backend::GaussianMixture)
      throw Error("knn_select: field has no kernel centers");
    const int n = static_cast<int>(centers_.size());
    if (k < 1 || k > n) throw InvalidK("knn_select: k out of range");
    if (!kd_nodes_.empty()) return knn_kdtree(x, k);
    std::vector<std::pair<double, int>> d(n);
    for (int i = 0; i < n; ++i) d[i] = {(x - centers_[i]).squaredNorm(), i};
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    d.resize(k);
    std::sort(d.begin(), d.end());
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = d[i].second;
    return idx;
  }

  /// p and its derivatives at x. Sums kernels in ascending index order
  /// (knn: ascending distance, then index) so results are reproducible.
  DiffJet<N> jet(const Vec<N>& x, int order = 3) const {
    if (!x.allFinite()) throw Error("field_jet: non-finite query point");
    if (backend_ == Backend::AnalyticRing) return ring_jet(x, order);
    DiffJet<N> sum;
    auto accumulate = [&](int j) {
      const Vec<N> u = x - centers_[j];
      const Mat<N>& A = inv_scales_[j];
      const Vec<N> b = A * u;
      const double v = weights_[j] * std::exp(-0.5 * u.dot(b));
      sum.value += v;
      if (order >= 1) sum.grad -= v * b;
      if (order >= 2) sum.hess += v * (b * b.transpose() - A);
      if (order >= 3) {
        for (int i = 0; i < N; ++i)
          for (int p = 0; p < N; ++p)
            for (int q = 0; q < N; ++q)
              sum.third[i](p, q) +=
                  v * (-b(i) * b(p) * b(q) + A(i, p) * b(q) + A(i, q) * b(p) + A(p, q) * b(i));
      }
    };
    if (knn_k_) {
      for (int j : knn_select(x, *knn_k_)) accumulate(j);
    } else {
      for (int j = 0; j < static_cast<int>(centers_.size()); ++j) accumulate(j);
    }
    if (order >= 2) sum.hess = ((sum.hess + sum.hess.transpose()) * 0.5).eval();
    if (order >= 3) detail::symmetrize_third<N>(sum.third);
    return sum;
  }

  double value(const Vec<N>& x) const { return jet(x, 0).value; }

 private:
  static constexpr std::size_t kKdTreeThreshold = 10000;

  DiffJet<N> ring_jet(const Vec<N>& x, int order) const {
    const double rho = x.norm();
    if (rho < 1e-12) throw SingularPoint("analytic ring: |x| not differentiable at the origin");
    const Vec<N> u = x / rho;
    // radial profile e^{phi}, phi = -(rho-r)^2/m
    const double phi1 = -2.0 * (rho - ring_.r) / ring_.m;
    const double phi2 = -2.0 / ring_.m;
    const double p0 = std::exp(-(rho - ring_.r) * (rho - ring_.r) / ring_.m);
    const double p1 = phi1 * p0;
    const double p2 = (phi2 + phi1 * phi1) * p0;
    const double p3 = (3.0 * phi1 * phi2 + phi1 * phi1 * phi1) * p0;

    DiffJet<N> jet;
    jet.value = p0;
    if (order >= 1) jet.grad = p1 * u;
    Mat<N> rho2;  // second derivatives of rho
    if (order >= 2) {
      rho2 = (Mat<N>::Identity() - u * u.transpose()) / rho;
      jet.hess = p2 * u * u.transpose() + p1 * rho2;
    }
    if (order >= 3) {
      for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j)
          for (int k = 0; k < N; ++k) {
            const double dij = (i == j) ? 1.0 : 0.0;
            const double dik = (i == k) ? 1.0 : 0.0;
            const double djk = (j == k) ? 1.0 : 0.0;
            const double rho3 = -((dij - u(i) * u(j)) * u(k) + (dik - u(i) * u(k)) * u(j) +
                                  (djk - u(j) * u(k)) * u(i)) /
                                (rho * rho);
            jet.third[i](j, k) = p3 * u(i) * u(j) * u(k) +
                                 p2 * (rho2(i, j) * u(k) + rho2(i, k) * u(j) + rho2(j, k) * u(i)) +
                                 p1 * rho3;
          }
      }
      detail::symmetrize_third<N>(jet.third);
    }
    return jet;
  }

  // Minimal k-d tree for exact nearest-neighbour queries on large pixel
  // clouds; ties resolved by (distance, index) so results match brute force.
  struct KdNode {
    int point = -1;
    int axis = 0;
    int left = -1, right = -1;
  };

  void build_kdtree() {
    std::vector<int> idx(centers_.size());
    std::iota(idx.begin(), idx.end(), 0);
    kd_nodes_.reserve(centers_.size());
    kd_root_ = build_kd(idx.begin(), idx.end(), 0);
  }

  int build_kd(std::vector<int>::iterator first, std::vector<int>::iterator last, int depth) {
    if (first == last) return -1;
    const int axis = depth % N;
    auto mid = first + (last - first) / 2;
    std::nth_element(first, mid, last, [&](int a, int b) {
      return std::make_pair(centers_[a](axis), a) < std::make_pair(centers_[b](axis), b);
    });
    KdNode node;
    node.point = *mid;
    node.axis = axis;
    const int self = static_cast<int>(kd_nodes_.size());
    kd_nodes_.push_back(node);
    kd_nodes_[self].left = build_kd(first, mid, depth + 1);
    kd_nodes_[self].right = build_kd(mid + 1, last, depth + 1);
    return self;
  }

  std::vector<int> knn_kdtree(const Vec<N>& x, int k) const {
    using Entry = std::pair<double, int>;  // (squared distance, index)
    std::vector<Entry> heap;               // max-heap on (d2, idx)
    heap.reserve(k + 1);
    auto worst = [&]() { return heap.front(); };
    auto consider = [&](int j) {
      Entry e{(x - centers_[j]).squaredNorm(), j};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(e);
        std::push_heap(heap.begin(), heap.end());
      } else if (e < worst()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = e;
        std::push_heap(heap.begin(), heap.end());
      }
    };
    search_kd(kd_root_, x, k, heap, consider);
    std::sort(heap.begin(), heap.end());
    std::vector<int> idx(heap.size());
    for (std::size_t i = 0; i < heap.size(); ++i) idx[i] = heap[i].second;
    return idx;
  }

  template <typename Consider>
  void search_kd(int node, const Vec<N>& x, int k, std::vector<std::pair<double, int>>& heap,
                 Consider& consider) const {
    if (node < 0) return;
    const KdNode& nd = kd_nodes_[node];
    consider(nd.point);
    const double delta = x(nd.axis) - centers_[nd.point](nd.axis);
    const int near = delta <= 0.0 ? nd.left : nd.right;
    const int far = delta <= 0.0 ? nd.right : nd.left;
    search_kd(near, x, k, heap, consider);
    // Visit the far side on exact ties too, so index tie-breaking is exact.
    if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().first)
      search_kd(far, x, k, heap, consider);
  }

  Backend backend_ = Backend::GaussianMixture;
  std::vector<Vec<N>> centers_;
  std::vector<double> weights_;
  std::vector<Mat<N>> scales_;
  std::vector<Mat<N>> inv_scales_;
  std::optional<int> knn_k_;
  RingParams ring_;
  std::vector<KdNode> kd_nodes_;
  int kd_root_ = -1;
};

template <int N>
DiffJet<N> field_jet(const IntensityField<N>& field, const Vec<N>& x, int order = 3) {
  return field.jet(x, order);
}

template <int N>
std::vector<int> knn_select(const IntensityField<N>& field, const Vec<N>& x, int k) {
  return field.knn_select(x, k);
}

}  // namespace tcf
