#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "tracksel/core.hpp"
#include "tracksel/image.hpp"

namespace tracksel {

/// Per-channel (R, G, B) normalised histograms of one pyramid cell.
using CellHistogram = std::array<std::vector<double>, 3>;

struct DominantColor {
  std::array<double, 3> color{};
  double weight = 0.0;
};
using DominantColorSet = std::vector<DominantColor>;

inline constexpr int kCovarianceFeatures = 11;

/// The five appearance descriptors of one object snapshot. The three colour descriptors are stored
/// per pyramid cell and are empty when the snapshot was built without image data.
struct DescriptorSet {
  double shape_ratio = 1.0;
  double area = 1.0;
  std::vector<CellHistogram> color_histogram;
  std::vector<Eigen::MatrixXd> color_covariance;
  std::vector<DominantColorSet> dominant_colors;

  bool has_color() const {
    return !color_histogram.empty() && !color_covariance.empty() && !dominant_colors.empty();
  }
};

inline double shape_ratio(const BoundingBox& b) { return b.w / b.h; }
inline double area(const BoundingBox& b) { return b.w * b.h; }

/// Level 0 is the whole box; level l splits it into 2^l equal-height horizontal stripes, top to
/// bottom. Cells are returned level by level, 2^L - 1 in total.
inline std::vector<BoundingBox> pyramid_cells(const BoundingBox& b, int levels) {
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  std::vector<BoundingBox> cells;
  cells.reserve((std::size_t{1} << levels) - 1);
  for (int l = 0; l < levels; ++l) {
    const int n = 1 << l;
    const double h = b.h / n;
    for (int i = 0; i < n; ++i) cells.push_back({b.x, b.y + i * h, b.w, h});
  }
  return cells;
}

namespace detail {

inline void require_overlap(const ColorFrame& f, const BoundingBox& b) {
  if (!b.valid()) throw std::invalid_argument("invalid bounding box");
  if (pixel_rect(b, f.width, f.height).empty()) throw std::invalid_argument("bounding box lies outside the frame");
}

inline int histogram_bin(std::uint8_t v, int bins) { return std::min(bins - 1, int(v) * bins / 256); }

}  // namespace detail

/// Histogram of the pixels of `cell`, restricted to `mask` (frame-sized, non-zero = foreground) when
/// one is supplied. Empty cells give the uniform histogram.
inline CellHistogram cell_histogram(const ColorFrame& f, const BoundingBox& cell, int bins,
                                    std::span<const std::uint8_t> mask = {}) {
  CellHistogram h;
  for (auto& ch : h) ch.assign(bins, 0.0);
  const PixelRect r = pixel_rect(cell, f.width, f.height);
  double n = 0.0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      if (!mask.empty() && mask[std::size_t(y) * f.width + x] == 0) continue;
      const Rgb& p = f.at(x, y);
      for (int c = 0; c < 3; ++c) h[c][detail::histogram_bin(p[c], bins)] += 1.0;
      n += 1.0;
    }
  }
  for (auto& ch : h) {
    if (n == 0.0) {
      std::fill(ch.begin(), ch.end(), 1.0 / bins);
    } else {
      for (double& v : ch) v /= n;
    }
  }
  return h;
}

inline std::vector<CellHistogram> color_histogram(const ColorFrame& f, const BoundingBox& b, const TrackerConfig& cfg,
                                                  std::span<const std::uint8_t> mask = {}) {
  detail::require_overlap(f, b);
  if (!mask.empty() && mask.size() != f.pixels.size())
    throw std::invalid_argument("foreground mask size does not match the frame");
  std::vector<CellHistogram> out;
  for (const auto& cell : pyramid_cells(b, cfg.pyramid_levels_L))
    out.push_back(cell_histogram(f, cell, cfg.hist_bins_B, mask));
  return out;
}

/// Sample covariance of [x, y, R, G, B, |dR|, |dG|, |dB|, angle R, angle G, angle B] over the pixels
/// of `cell`. x and y are normalised to [0,1] across the cell; gradients are central differences on
/// the whole frame. The result is shifted by lambda*I with lambda = 1e-6 * trace / 11 + 1e-9.
inline Eigen::MatrixXd cell_covariance(const ColorFrame& f, const BoundingBox& cell) {
  constexpr int d = kCovarianceFeatures;
  const PixelRect r = pixel_rect(cell, f.width, f.height);
  const std::size_t n = r.count();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  if (n >= 2) {
    Eigen::MatrixXd feats(static_cast<Eigen::Index>(n), d);
    const double sx = r.width() > 1 ? 1.0 / (r.width() - 1) : 0.0;
    const double sy = r.height() > 1 ? 1.0 / (r.height() - 1) : 0.0;
    Eigen::Index row = 0;
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x, ++row) {
        const Rgb& p = f.at(x, y);
        const Rgb& left = f.at(std::max(x - 1, 0), y);
        const Rgb& right = f.at(std::min(x + 1, f.width - 1), y);
        const Rgb& up = f.at(x, std::max(y - 1, 0));
        const Rgb& down = f.at(x, std::min(y + 1, f.height - 1));
        feats(row, 0) = (x - r.x0) * sx;
        feats(row, 1) = (y - r.y0) * sy;
        for (int c = 0; c < 3; ++c) {
          const double gx = 0.5 * (double(right[c]) - double(left[c]));
          const double gy = 0.5 * (double(down[c]) - double(up[c]));
          feats(row, 2 + c) = p[c];
          feats(row, 5 + c) = std::hypot(gx, gy);
          feats(row, 8 + c) = std::atan2(gy, gx);
        }
      }
    }
    const Eigen::RowVectorXd mean = feats.colwise().mean();
    const Eigen::MatrixXd centered = feats.rowwise() - mean;
    cov = (centered.transpose() * centered) / double(n - 1);
    cov = (0.5 * (cov + cov.transpose())).eval();
  }
  const double lambda = 1e-6 * cov.trace() / d + 1e-9;
  cov.diagonal().array() += lambda;
  return cov;
}

inline std::vector<Eigen::MatrixXd> color_covariance(const ColorFrame& f, const BoundingBox& b,
                                                     const TrackerConfig& cfg) {
  detail::require_overlap(f, b);
  std::vector<Eigen::MatrixXd> out;
  for (const auto& cell : pyramid_cells(b, cfg.pyramid_levels_L)) out.push_back(cell_covariance(f, cell));
  return out;
}

namespace detail {

struct WeightedColor {
  std::array<double, 3> rgb;
  double weight;
};

inline double rgb_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

inline double unit_draw(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

/// Weighted k-means++ / Lloyd on a colour list that is already in canonical (sorted) order.
inline std::vector<WeightedColor> weighted_kmeans(const std::vector<WeightedColor>& pts, int k, int iterations,
                                                  std::uint64_t seed) {
  k = std::min<int>(k, static_cast<int>(pts.size()));
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (const auto& p : pts) total += p.weight;

  std::vector<std::array<double, 3>> centers;
  auto pick = [&](const std::vector<double>& mass) {
    double sum = 0.0;
    for (double m : mass) sum += m;
    double target = unit_draw(rng) * sum;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      target -= mass[i];
      if (target < 0.0 && mass[i] > 0.0) return i;
    }
    for (std::size_t i = mass.size(); i-- > 0;)
      if (mass[i] > 0.0) return i;
    return std::size_t{0};
  };

  std::vector<double> mass(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) mass[i] = pts[i].weight;
  centers.push_back(pts[pick(mass)].rgb);
  std::vector<double> nearest(pts.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double dd = rgb_distance(pts[i].rgb, centers.back());
      nearest[i] = std::min(nearest[i], dd * dd);
      mass[i] = pts[i].weight * nearest[i];
    }
    centers.push_back(pts[pick(mass)].rgb);
  }

  std::vector<int> assign(pts.size(), -1);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      int best = 0;
      double best_d = rgb_distance(pts[i].rgb, centers[0]);
      for (int c = 1; c < k; ++c) {
        const double dd = rgb_distance(pts[i].rgb, centers[c]);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::array<double, 4>> acc(k, {0, 0, 0, 0});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto& a = acc[assign[i]];
      for (int c = 0; c < 3; ++c) a[c] += pts[i].weight * pts[i].rgb[c];
      a[3] += pts[i].weight;
    }
    for (int c = 0; c < k; ++c)
      if (acc[c][3] > 0.0) centers[c] = {acc[c][0] / acc[c][3], acc[c][1] / acc[c][3], acc[c][2] / acc[c][3]};
  }

  std::vector<WeightedColor> clusters(k, WeightedColor{{0, 0, 0}, 0.0});
  for (int c = 0; c < k; ++c) clusters[c].rgb = centers[c];
  for (std::size_t i = 0; i < pts.size(); ++i) clusters[assign[i]].weight += pts[i].weight / total;
  std::erase_if(clusters, [](const WeightedColor& c) { return c.weight <= 0.0; });
  return clusters;
}

}  // namespace detail

/// Dominant colours of one cell: weighted k-means over the distinct pixel colours, then merging of
/// clusters closer than the merge radius and removal of clusters lighter than the minimum weight.
/// Sorted by weight, heaviest first; weights sum to 1.
inline DominantColorSet cell_dominant_colors(const ColorFrame& f, const BoundingBox& cell, const TrackerConfig& cfg) {
  const PixelRect r = pixel_rect(cell, f.width, f.height);
  if (r.empty()) return {DominantColor{{0, 0, 0}, 1.0}};

  // distinct colours in lexicographic order make the result independent of scan order
  std::map<Rgb, double> counts;
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) counts[f.at(x, y)] += 1.0;
  std::vector<detail::WeightedColor> pts;
  pts.reserve(counts.size());
  for (const auto& [c, n] : counts) pts.push_back({{double(c[0]), double(c[1]), double(c[2])}, n});

  auto clusters = detail::weighted_kmeans(pts, cfg.dominant_colors_N, cfg.kmeans_iterations, cfg.kmeans_seed);

  while (clusters.size() > 1) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double dd = detail::rgb_distance(clusters[i].rgb, clusters[j].rgb);
        if (dd < best) {
          best = dd;
          bi = i;
          bj = j;
        }
      }
    if (best >= cfg.dominant_merge_radius) break;
    auto& a = clusters[bi];
    const auto& b = clusters[bj];
    const double w = a.weight + b.weight;
    for (int c = 0; c < 3; ++c) a.rgb[c] = (a.rgb[c] * a.weight + b.rgb[c] * b.weight) / w;
    a.weight = w;
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  const auto heaviest = std::max_element(clusters.begin(), clusters.end(),
                                         [](const auto& a, const auto& b) { return a.weight < b.weight; });
  const detail::WeightedColor keep = *heaviest;
  std::erase_if(clusters, [&](const auto& c) { return c.weight < cfg.dominant_min_weight; });
  if (clusters.empty()) clusters.push_back(keep);

  double total = 0.0;
  for (const auto& c : clusters) total += c.weight;
  DominantColorSet out;
  for (const auto& c : clusters) out.push_back({c.rgb, c.weight / total});
  std::sort(out.begin(), out.end(), [](const DominantColor& a, const DominantColor& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.color < b.color;
  });
  return out;
}

inline std::vector<DominantColorSet> dominant_color(const ColorFrame& f, const BoundingBox& b,
                                                    const TrackerConfig& cfg) {
  detail::require_overlap(f, b);
  std::vector<DominantColorSet> out;
  for (const auto& cell : pyramid_cells(b, cfg.pyramid_levels_L)) out.push_back(cell_dominant_colors(f, cell, cfg));
  return out;
}

/// Geometry-only descriptor set, used when no image data is available.
inline DescriptorSet extract_shape(const BoundingBox& b) {
  DescriptorSet d;
  d.shape_ratio = shape_ratio(b);
  d.area = area(b);
  return d;
}

inline DescriptorSet extract_all(const ColorFrame& f, const BoundingBox& b, const TrackerConfig& cfg,
                                 std::span<const std::uint8_t> mask = {}) {
  DescriptorSet d = extract_shape(b);
  d.color_histogram = color_histogram(f, b, cfg, mask);
  d.color_covariance = color_covariance(f, b, cfg);
  d.dominant_colors = dominant_color(f, b, cfg);
  return d;
}

}  // namespace tracksel
