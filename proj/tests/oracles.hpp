#pragma once

// Test-only reference solvers and image fixtures. Nothing here calls into the code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "tracksel/image.hpp"

namespace oracle {

/// Dense two-phase simplex: maximise c.x subject to A x <= b, x >= 0.
class LinearProgram {
 public:
  LinearProgram(const std::vector<std::vector<double>>& A, const std::vector<double>& b, const std::vector<double>& c)
      : m_(static_cast<int>(b.size())), n_(static_cast<int>(c.size())), N_(n_ + 1), B_(m_),
        D_(m_ + 2, std::vector<double>(n_ + 2, 0.0)) {
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j) D_[i][j] = A[i][j];
    for (int i = 0; i < m_; ++i) {
      B_[i] = n_ + i;
      D_[i][n_] = -1;
      D_[i][n_ + 1] = b[i];
    }
    for (int j = 0; j < n_; ++j) {
      N_[j] = j;
      D_[m_][j] = -c[j];
    }
    N_[n_] = -1;
    D_[m_ + 1][n_] = 1;
  }

  /// Optimal objective; NaN when infeasible or unbounded.
  double solve() {
    int r = 0;
    for (int i = 1; i < m_; ++i)
      if (D_[i][n_ + 1] < D_[r][n_ + 1]) r = i;
    if (D_[r][n_ + 1] < -kEps) {
      pivot(r, n_);
      if (!simplex(1) || D_[m_ + 1][n_ + 1] < -kEps) return std::numeric_limits<double>::quiet_NaN();
      for (int i = 0; i < m_; ++i)
        if (B_[i] == -1) {
          int s = -1;
          for (int j = 0; j <= n_; ++j)
            if (s == -1 || D_[i][j] < D_[i][s] || (D_[i][j] == D_[i][s] && N_[j] < N_[s])) s = j;
          pivot(i, s);
        }
    }
    if (!simplex(2)) return std::numeric_limits<double>::quiet_NaN();
    return D_[m_][n_ + 1];
  }

 private:
  static constexpr double kEps = 1e-12;

  void pivot(int r, int s) {
    const double inv = 1.0 / D_[r][s];
    for (int i = 0; i < m_ + 2; ++i)
      if (i != r)
        for (int j = 0; j < n_ + 2; ++j)
          if (j != s) D_[i][j] -= D_[r][j] * D_[i][s] * inv;
    for (int j = 0; j < n_ + 2; ++j)
      if (j != s) D_[r][j] *= inv;
    for (int i = 0; i < m_ + 2; ++i)
      if (i != r) D_[i][s] *= -inv;
    D_[r][s] = inv;
    std::swap(B_[r], N_[s]);
  }

  bool simplex(int phase) {
    const int x = phase == 1 ? m_ + 1 : m_;
    while (true) {
      int s = -1;
      for (int j = 0; j <= n_; ++j) {
        if (phase == 2 && N_[j] == -1) continue;
        if (s == -1 || D_[x][j] < D_[x][s] || (D_[x][j] == D_[x][s] && N_[j] < N_[s])) s = j;
      }
      if (D_[x][s] > -kEps) return true;
      int r = -1;
      for (int i = 0; i < m_; ++i) {
        if (D_[i][s] < kEps) continue;
        if (r == -1) {
          r = i;
          continue;
        }
        const double lhs = D_[i][n_ + 1] / D_[i][s], rhs = D_[r][n_ + 1] / D_[r][s];
        if (lhs < rhs || (lhs == rhs && B_[i] < B_[r])) r = i;
      }
      if (r == -1) return false;
      pivot(r, s);
    }
  }

  int m_, n_;
  std::vector<int> N_, B_;
  std::vector<std::vector<double>> D_;
};

/// Balanced transport cost as a linear program (equalities written as pairs of inequalities).
inline double transport_lp(const std::vector<double>& supply, const std::vector<double>& demand,
                           const std::vector<double>& cost) {
  const std::size_t m = supply.size(), n = demand.size();
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  auto equality = [&](const std::vector<double>& row, double rhs) {
    A.push_back(row);
    b.push_back(rhs);
    std::vector<double> neg(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) neg[k] = -row[k];
    A.push_back(neg);
    b.push_back(-rhs);
  };
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(m * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) row[i * n + j] = 1.0;
    equality(row, supply[i]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> row(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) row[i * n + j] = 1.0;
    equality(row, demand[j]);
  }
  std::vector<double> c(m * n);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = -cost[k];
  return -LinearProgram(A, b, c).solve();
}

/// 1D EMD through the generic transport LP with |i - j| ground distance.
inline double emd_1d_lp(const std::vector<double>& h1, const std::vector<double>& h2) {
  const std::size_t n = h1.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = std::abs(double(i) - double(j));
  return transport_lp(h1, h2, cost);
}

/// Best total of any partial one-to-one matching over pairs scoring >= forbid_below (and >= 0),
/// by exhaustive search. Totals are summed in row order.
inline double best_matching_total(const std::vector<std::vector<double>>& s, double forbid_below) {
  const std::size_t r = s.size();
  const std::size_t c = r ? s[0].size() : 0;
  std::vector<char> used(c, 0);
  double best = 0.0;
  auto rec = [&](auto&& self, std::size_t row, double acc) -> void {
    if (row == r) {
      best = std::max(best, acc);
      return;
    }
    self(self, row + 1, acc);
    for (std::size_t j = 0; j < c; ++j) {
      if (used[j] || s[row][j] < forbid_below || s[row][j] < 0.0) continue;
      used[j] = 1;
      self(self, row + 1, acc + s[row][j]);
      used[j] = 0;
    }
  };
  rec(rec, 0, 0.0);
  return best;
}

/// Smooth random texture in [0, 255] (box-blurred uniform noise).
inline tracksel::GrayFrame textured_frame(int w, int h, std::uint64_t seed, int blur = 2) {
  std::mt19937_64 rng(seed);
  std::vector<double> raw(std::size_t(w) * h);
  for (double& v : raw) v = double(rng() % 256);
  tracksel::GrayFrame out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      int n = 0;
      for (int dy = -blur; dy <= blur; ++dy)
        for (int dx = -blur; dx <= blur; ++dx) {
          const int u = std::clamp(x + dx, 0, w - 1), v = std::clamp(y + dy, 0, h - 1);
          s += raw[std::size_t(v) * w + u];
          ++n;
        }
      out.at(x, y) = s / n;
    }
  // stretch contrast back to the full range
  const auto [lo, hi] = std::minmax_element(out.pixels.begin(), out.pixels.end());
  const double a = *lo, b = *hi;
  for (double& v : out.pixels) v = 255.0 * (v - a) / (b - a);
  return out;
}

/// `src` translated by integer (dx, dy): out(x, y) = src(x - dx, y - dy), uncovered pixels taken
/// from `fill` (an independent texture).
inline tracksel::GrayFrame shifted(const tracksel::GrayFrame& src, int dx, int dy, const tracksel::GrayFrame& fill) {
  tracksel::GrayFrame out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      const int sx = x - dx, sy = y - dy;
      out.at(x, y) = (sx >= 0 && sy >= 0 && sx < src.width && sy < src.height) ? src.at(sx, sy) : fill.at(x, y);
    }
  return out;
}

}  // namespace oracle
