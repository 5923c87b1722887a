#pragma once

#include "evasim/core.hpp"

#include <numeric>
#include <vector>

namespace evasim {

/// Cluster labels per input point; kNoise for unclustered points.
struct DbscanResult {
  static constexpr int kNoise = -1;
  std::vector<int> labels;
  int n_clusters = 0;
};

namespace detail {

inline bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

/// Density clustering. Core points (>= min_pts neighbors within eps, self
/// included) form clusters as connected components of the core-core
/// eps-graph. A non-core point joins the cluster of its nearest core
/// neighbor within eps (exact-distance ties broken toward the
/// lexicographically smallest core point), else it is noise. The resulting
/// partition is invariant under input permutation, unlike seed-order DBSCAN
/// whose border attachment depends on scan order.
inline DbscanResult dbscan(const std::vector<Vec3>& pts, double eps, int min_pts) {
  const int n = static_cast<int>(pts.size());
  DbscanResult out;
  out.labels.assign(n, DbscanResult::kNoise);
  if (n == 0) return out;

  const double eps2 = eps * eps;
  std::vector<std::vector<int>> nbrs(n);
  for (int i = 0; i < n; ++i) {
    nbrs[i].push_back(i);
    for (int j = i + 1; j < n; ++j) {
      if ((pts[i] - pts[j]).squaredNorm() <= eps2) {
        nbrs[i].push_back(j);
        nbrs[j].push_back(i);
      }
    }
  }

  std::vector<char> core(n, 0);
  for (int i = 0; i < n; ++i) core[i] = nbrs[i].size() >= static_cast<size_t>(min_pts);

  detail::UnionFind uf(n);
  for (int i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (int j : nbrs[i]) {
      if (core[j]) uf.merge(i, j);
    }
  }

  std::vector<int> root_label(n, -1);
  for (int i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const int r = uf.find(i);
    if (root_label[r] < 0) root_label[r] = out.n_clusters++;
    out.labels[i] = root_label[r];
  }

  for (int i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    double best_d2 = 0.0;
    for (int j : nbrs[i]) {
      if (!core[j]) continue;
      const double d2 = (pts[i] - pts[j]).squaredNorm();
      if (best < 0 || d2 < best_d2 ||
          (d2 == best_d2 && detail::lex_less(pts[j], pts[best]))) {
        best = j;
        best_d2 = d2;
      }
    }
    if (best >= 0) out.labels[i] = out.labels[best];
  }
  return out;
}

}  // namespace evasim
