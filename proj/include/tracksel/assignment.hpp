#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tracksel {

/// Dense row-major score matrix.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct AssignmentProblem {
  ScoreMatrix scores;
  /// Pairs scoring below this are never matched.
  double forbid_below = 0.0;
};

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  double total = 0.0;
};

namespace detail {

/// Minimum-cost perfect assignment of n rows into m >= n columns (potentials / shortest augmenting
/// path formulation, O(n^2 m)). Returns the column of each row.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost, std::size_t n,
                                                    std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
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
      for (std::size_t j = 0; j <= m; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Maximum-total matching over the pairs whose score is at least `forbid_below`. Rows and columns
/// may stay unmatched; a pair is only reported when matching it does not lower the total.
inline Matching solve(const AssignmentProblem& problem) {
  const ScoreMatrix& s = problem.scores;
  const std::size_t r = s.rows(), c = s.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (!std::isfinite(s(i, j))) throw std::invalid_argument("assignment scores must be finite");
  Matching out;
  if (r == 0 || c == 0) return out;

  auto allowed = [&](std::size_t i, std::size_t j) { return s(i, j) >= problem.forbid_below && s(i, j) >= 0.0; };

  // Maximisation becomes minimisation of (offset - gain); forbidden pairs gain nothing, which is the
  // same as leaving both sides unmatched.
  double offset = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (allowed(i, j)) offset = std::max(offset, s(i, j));

  const bool transpose = r > c;
  const std::size_t n = transpose ? c : r;
  const std::size_t m = transpose ? r : c;
  std::vector<std::vector<double>> cost(n, std::vector<double>(m, offset));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const std::size_t i = transpose ? b : a;
      const std::size_t j = transpose ? a : b;
      if (allowed(i, j)) cost[a][b] = offset - s(i, j);
    }

  const auto assignment = detail::min_cost_assignment(cost, n, m);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t i = transpose ? assignment[a] : a;
    const std::size_t j = transpose ? a : assignment[a];
    if (allowed(i, j)) out.pairs.emplace_back(i, j);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (const auto& [i, j] : out.pairs) out.total += s(i, j);
  return out;
}

}  // namespace tracksel
