#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tracksel/core.hpp"
#include "tracksel/descriptors.hpp"

namespace tracksel {

inline constexpr int kDescriptorCount = 5;

enum class DescriptorKind { ShapeRatio = 0, Area = 1, ColorHistogram = 2, ColorCovariance = 3, DominantColor = 4 };

/// Discriminative weight of each descriptor for one object snapshot.
using WeightVector = std::array<double, kDescriptorCount>;

struct ObjectSnapshot {
  Detection detection;
  DescriptorSet descriptors;
  WeightVector weights{1, 1, 1, 1, 1};

  std::int64_t frame() const { return detection.frame_index; }
  const BoundingBox& box() const { return detection.bbox; }
  SnapshotSource source() const { return detection.source; }
};

/// Ratio similarity used for shape ratio and area: min/max.
inline double ds_size(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("ds_size needs positive values");
  return std::min(a, b) / std::max(a, b);
}

/// Exact earth mover's distance between two 1D histograms with unit distance between adjacent bins.
inline double emd_1d(std::span<const double> h1, std::span<const double> h2) {
  if (h1.size() != h2.size()) throw std::invalid_argument("emd_1d: histogram sizes differ");
  const double s1 = std::accumulate(h1.begin(), h1.end(), 0.0);
  const double s2 = std::accumulate(h2.begin(), h2.end(), 0.0);
  if (std::abs(s1 - 1.0) > 1e-6 || std::abs(s2 - 1.0) > 1e-6)
    throw std::invalid_argument("emd_1d: histograms must be normalised");
  double cdf = 0.0;
  double dist = 0.0;
  for (std::size_t i = 0; i + 1 < h1.size(); ++i) {
    cdf += h1[i] - h2[i];
    dist += std::abs(cdf);
  }
  return dist;
}

/// Spatial-pyramid combination of per-cell similarities laid out level by level (see pyramid_cells).
/// Level 0 has weight 2^-(L-1), level l >= 1 has weight 2^-(L-l); the weights sum to one.
inline double pyramid_combine(std::span<const double> cell_sims, int levels) {
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  const std::size_t expected = (std::size_t{1} << levels) - 1;
  if (cell_sims.size() != expected) throw std::invalid_argument("pyramid_combine: wrong number of cells");
  double total = 0.0;
  std::size_t offset = 0;
  for (int l = 0; l < levels; ++l) {
    const std::size_t n = std::size_t{1} << l;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += cell_sims[offset + i];
    mean /= double(n);
    const double weight = l == 0 ? std::ldexp(1.0, -(levels - 1)) : std::ldexp(1.0, -(levels - l));
    total += weight * mean;
    offset += n;
  }
  return std::clamp(total, 0.0, 1.0);
}

inline int pyramid_levels_of(std::size_t cells) {
  int levels = 0;
  while (((std::size_t{1} << levels) - 1) < cells) ++levels;
  if (((std::size_t{1} << levels) - 1) != cells) throw std::invalid_argument("cell count is not a pyramid");
  return levels;
}

/// 1 - EMD/(B-1), averaged over the three channels of one cell.
inline double cell_histogram_similarity(const CellHistogram& a, const CellHistogram& b) {
  double sim = 0.0;
  for (int c = 0; c < 3; ++c) {
    if (a[c].size() != b[c].size() || a[c].size() < 2) throw std::invalid_argument("histogram shapes differ");
    sim += 1.0 - emd_1d(a[c], b[c]) / double(a[c].size() - 1);
  }
  return std::clamp(sim / 3.0, 0.0, 1.0);
}

inline double ds_histogram(const DescriptorSet& a, const DescriptorSet& b) {
  if (a.color_histogram.size() != b.color_histogram.size() || a.color_histogram.empty())
    throw std::invalid_argument("ds_histogram: pyramid shapes differ");
  std::vector<double> sims;
  for (std::size_t i = 0; i < a.color_histogram.size(); ++i)
    sims.push_back(cell_histogram_similarity(a.color_histogram[i], b.color_histogram[i]));
  return pyramid_combine(sims, pyramid_levels_of(sims.size()));
}

class NotPositiveDefinite : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Forstner-Moonen metric: sqrt(sum ln^2 lambda_i) over the generalised eigenvalues of (c1, c2).
inline double forstner_distance(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2) {
  if (c1.rows() != c1.cols() || c2.rows() != c2.cols() || c1.rows() != c2.rows())
    throw std::invalid_argument("forstner_distance: dimension mismatch");
  if (c1.llt().info() != Eigen::Success || c2.llt().info() != Eigen::Success)
    throw NotPositiveDefinite("forstner_distance: matrix is not positive definite");
  const Eigen::MatrixXd s1 = 0.5 * (c1 + c1.transpose());
  const Eigen::MatrixXd s2 = 0.5 * (c2 + c2.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(s1, s2, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NotPositiveDefinite("forstner_distance: eigen-decomposition failed");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double lambda = solver.eigenvalues()(i);
    if (!(lambda > 0.0)) throw NotPositiveDefinite("forstner_distance: non-positive generalised eigenvalue");
    const double l = std::log(lambda);
    sum += l * l;
  }
  return std::sqrt(sum);
}

inline double covariance_similarity(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2) {
  return 1.0 / (1.0 + forstner_distance(c1, c2));
}

inline double ds_covariance(const DescriptorSet& a, const DescriptorSet& b) {
  if (a.color_covariance.size() != b.color_covariance.size() || a.color_covariance.empty())
    throw std::invalid_argument("ds_covariance: pyramid shapes differ");
  std::vector<double> sims;
  for (std::size_t i = 0; i < a.color_covariance.size(); ++i)
    sims.push_back(covariance_similarity(a.color_covariance[i], b.color_covariance[i]));
  return pyramid_combine(sims, pyramid_levels_of(sims.size()));
}

/// Exact balanced transport cost between two weighted point sets, solved as a min-cost flow by
/// successive shortest paths. `cost` is row-major supply x demand. Supplies and demands must have
/// equal totals.
inline double transport_cost(std::span<const double> supply, std::span<const double> demand,
                             std::span<const double> cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (cost.size() != m * n) throw std::invalid_argument("transport_cost: cost matrix shape");
  constexpr double tiny = 1e-14;

  // node layout: 0 = source, 1..m supplies, m+1..m+n demands, m+n+1 sink
  struct Arc {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
  };
  const std::size_t nodes = m + n + 2;
  const std::size_t src = 0, sink = m + n + 1;
  std::vector<std::vector<Arc>> g(nodes);
  auto add = [&](std::size_t u, std::size_t v, double cap, double c) {
    g[u].push_back({v, cap, c, g[v].size()});
    g[v].push_back({u, 0.0, -c, g[u].size() - 1});
  };
  for (std::size_t i = 0; i < m; ++i) add(src, 1 + i, supply[i], 0.0);
  for (std::size_t j = 0; j < n; ++j) add(1 + m + j, sink, demand[j], 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) add(1 + i, 1 + m + j, std::numeric_limits<double>::infinity(), cost[i * n + j]);

  double total = 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<double> dist(nodes, inf);
    std::vector<std::size_t> prev_node(nodes, nodes), prev_arc(nodes, 0);
    dist[src] = 0.0;
    for (std::size_t round = 0; round + 1 < nodes; ++round) {
      bool relaxed = false;
      for (std::size_t u = 0; u < nodes; ++u) {
        if (dist[u] == inf) continue;
        for (std::size_t a = 0; a < g[u].size(); ++a) {
          const Arc& arc = g[u][a];
          if (arc.cap > tiny && dist[u] + arc.cost < dist[arc.to] - 1e-15) {
            dist[arc.to] = dist[u] + arc.cost;
            prev_node[arc.to] = u;
            prev_arc[arc.to] = a;
            relaxed = true;
          }
        }
      }
      if (!relaxed) break;
    }
    if (dist[sink] == inf) break;
    double push = inf;
    for (std::size_t v = sink; v != src; v = prev_node[v]) push = std::min(push, g[prev_node[v]][prev_arc[v]].cap);
    for (std::size_t v = sink; v != src; v = prev_node[v]) {
      Arc& arc = g[prev_node[v]][prev_arc[v]];
      arc.cap -= push;
      g[v][arc.rev].cap += push;
    }
    total += push * dist[sink];
  }
  return total;
}

/// Transport EMD between two dominant-colour sets with ground distance RGB-Euclidean / (255*sqrt 3).
inline double dominant_color_emd(const DominantColorSet& a, const DominantColorSet& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dominant colour set is empty");
  std::vector<double> supply, demand, cost;
  double sa = 0.0, sb = 0.0;
  for (const auto& c : a) sa += c.weight;
  for (const auto& c : b) sb += c.weight;
  for (const auto& c : a) supply.push_back(c.weight / sa);
  for (const auto& c : b) demand.push_back(c.weight / sb);
  const double norm = 255.0 * std::sqrt(3.0);
  for (const auto& ca : a)
    for (const auto& cb : b) {
      const double dr = ca.color[0] - cb.color[0], dg = ca.color[1] - cb.color[1], db = ca.color[2] - cb.color[2];
      cost.push_back(std::sqrt(dr * dr + dg * dg + db * db) / norm);
    }
  return transport_cost(supply, demand, cost);
}

inline double dominant_color_similarity(const DominantColorSet& a, const DominantColorSet& b) {
  return std::clamp(1.0 - dominant_color_emd(a, b), 0.0, 1.0);
}

inline double ds_dominant_color(const DescriptorSet& a, const DescriptorSet& b) {
  if (a.dominant_colors.size() != b.dominant_colors.size() || a.dominant_colors.empty())
    throw std::invalid_argument("ds_dominant_color: pyramid shapes differ");
  std::vector<double> sims;
  for (std::size_t i = 0; i < a.dominant_colors.size(); ++i)
    sims.push_back(dominant_color_similarity(a.dominant_colors[i], b.dominant_colors[i]));
  return pyramid_combine(sims, pyramid_levels_of(sims.size()));
}

/// The five descriptor similarities; colour entries are empty when either side lacks image data.
using DescriptorSimilarities = std::array<std::optional<double>, kDescriptorCount>;

inline DescriptorSimilarities descriptor_similarities(const DescriptorSet& a, const DescriptorSet& b) {
  DescriptorSimilarities ds;
  ds[0] = ds_size(a.shape_ratio, b.shape_ratio);
  ds[1] = ds_size(a.area, b.area);
  if (a.has_color() && b.has_color()) {
    ds[2] = ds_histogram(a, b);
    ds[3] = ds_covariance(a, b);
    ds[4] = ds_dominant_color(a, b);
  }
  return ds;
}

/// Discriminative descriptor weights of `obj` against the candidate objects of the same frame.
/// Only candidates passing the neighbourhood gates count, and `obj` itself is skipped when it is part
/// of `others`. Without neighbours every weight is 1.
inline WeightVector descriptor_weights(const ObjectSnapshot& obj, std::span<const ObjectSnapshot> others,
                                       const TrackerConfig& cfg) {
  WeightVector w{0, 0, 0, 0, 0};
  std::size_t count = 0;
  for (const auto& other : others) {
    if (&other == &obj) continue;
    if (!are_neighbors(obj.box(), other.box(), cfg)) continue;
    const auto ds = descriptor_similarities(obj.descriptors, other.descriptors);
    for (int k = 0; k < kDescriptorCount; ++k) {
      if (!ds[k]) continue;
      w[k] += std::log10(1.0 / std::clamp(*ds[k], cfg.ds_floor, 1.0));
    }
    ++count;
  }
  if (count == 0) return {1, 1, 1, 1, 1};
  for (double& v : w) v /= double(count);
  return w;
}

/// Weighted combination of the descriptor similarities with weights w_a + w_b. Falls back to the
/// plain mean when the weights sum to zero.
inline double combine_similarities(const DescriptorSimilarities& ds, const WeightVector& wa, const WeightVector& wb) {
  double num = 0.0, den = 0.0, plain = 0.0;
  int used = 0;
  for (int k = 0; k < kDescriptorCount; ++k) {
    if (!ds[k]) continue;
    const double w = wa[k] + wb[k];
    num += w * *ds[k];
    den += w;
    plain += *ds[k];
    ++used;
  }
  if (used == 0) return 0.0;
  if (den <= 0.0) return std::clamp(plain / used, 0.0, 1.0);
  return std::clamp(num / den, 0.0, 1.0);
}

inline double global_similarity(const ObjectSnapshot& a, const WeightVector& wa, const ObjectSnapshot& b,
                                const WeightVector& wb) {
  return combine_similarities(descriptor_similarities(a.descriptors, b.descriptors), wa, wb);
}

inline double global_similarity(const ObjectSnapshot& a, const ObjectSnapshot& b) {
  return global_similarity(a, a.weights, b, b.weights);
}

}  // namespace tracksel
