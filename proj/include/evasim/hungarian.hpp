#pragma once

#include <limits>
#include <utility>
#include <vector>

namespace evasim {

struct AssignmentResult {
  std::vector<int> row_to_col;  ///< row i is assigned to column row_to_col[i]
  double total_cost = 0.0;
};

/// Minimum-cost perfect assignment on a square cost matrix, O(n^3) potentials
/// method. After solving, equal-cost pairwise swaps are canonicalized toward
/// the lowest (row, column) lexicographic order so ties resolve
/// deterministically regardless of matrix layout.
inline AssignmentResult solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  AssignmentResult res;
  if (n == 0) return res;
  const double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  res.row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) res.row_to_col[p[j] - 1] = j - 1;
  }

  // Cost-preserving canonicalization: swapping two assignments is allowed
  // only when the total is bitwise unchanged, so optimality is preserved.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        const int ja = res.row_to_col[a];
        const int jb = res.row_to_col[b];
        if (jb < ja && cost[a][jb] + cost[b][ja] == cost[a][ja] + cost[b][jb]) {
          res.row_to_col[a] = jb;
          res.row_to_col[b] = ja;
          changed = true;
        }
      }
    }
  }

  for (int i = 0; i < n; ++i) res.total_cost += cost[i][res.row_to_col[i]];
  return res;
}

struct Matching {
  std::vector<std::pair<int, int>> pairs;  ///< (prev index, curr index)
  std::vector<int> unmatched_prev;
  std::vector<int> unmatched_curr;
};

/// Cost assigned to gated-out pairs. Must exceed twice the dummy cost so a
/// forbidden pair is never cheaper than leaving both sides unmatched.
constexpr double kForbiddenCost = 1e9;
/// Cost of matching a real row or column to a padding dummy.
constexpr double kDummyCost = 1e5;

/// Optimal gated bipartite matching between n_prev and n_curr items.
/// cost(i, j) gives the pair cost; admissible(i, j) gates pairs. The matrix is
/// padded to (n_prev + n_curr) square with dummy rows and columns so every
/// item can stay unmatched at kDummyCost.
template <class CostFn, class GateFn>
Matching match_bipartite(int n_prev, int n_curr, CostFn cost, GateFn admissible) {
  Matching m;
  if (n_prev == 0 || n_curr == 0) {
    for (int i = 0; i < n_prev; ++i) m.unmatched_prev.push_back(i);
    for (int j = 0; j < n_curr; ++j) m.unmatched_curr.push_back(j);
    return m;
  }
  const int n = n_prev + n_curr;
  std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n_prev; ++i) {
    for (int j = 0; j < n_curr; ++j) {
      c[i][j] = admissible(i, j) ? cost(i, j) : kForbiddenCost;
    }
    for (int j = n_curr; j < n; ++j) c[i][j] = kDummyCost;
  }
  for (int i = n_prev; i < n; ++i) {
    for (int j = 0; j < n_curr; ++j) c[i][j] = kDummyCost;
  }

  const AssignmentResult res = solve_assignment(c);
  std::vector<char> curr_matched(n_curr, 0);
  for (int i = 0; i < n_prev; ++i) {
    const int j = res.row_to_col[i];
    if (j < n_curr && c[i][j] < kDummyCost) {
      m.pairs.emplace_back(i, j);
      curr_matched[j] = 1;
    } else {
      m.unmatched_prev.push_back(i);
    }
  }
  for (int j = 0; j < n_curr; ++j) {
    if (!curr_matched[j]) m.unmatched_curr.push_back(j);
  }
  return m;
}

}  // namespace evasim
