#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace tracksel {

/// Axis-aligned rectangle in continuous pixel coordinates (left, top, width, height).
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }

  bool valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
           h > 0.0;
  }

  bool contains(double px, double py) const { return px >= x && px < right() && py >= y && py < bottom(); }

  static BoundingBox centered(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class SnapshotSource { Detector, SplitCorrection };

struct Detection {
  std::int64_t frame_index = 0;
  BoundingBox bbox;
  double confidence = 1.0;
  SnapshotSource source = SnapshotSource::Detector;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Row-major 3x3 image-to-ground homography.
using Homography = std::array<double, 9>;

/// Every tunable of the tracker. Defaults are the values used by the test suite.
struct TrackerConfig {
  // neighbourhood gates for the discriminative weights
  double epsilon1_px = 120.0;
  double epsilon2_m = 2.0;
  std::optional<Homography> homography;

  int temporal_window_T = 15;
  int model_window_Q = 10;
  int hist_bins_B = 16;
  int pyramid_levels_L = 2;
  int dominant_colors_N = 4;
  double dominant_merge_radius = 25.0;
  double dominant_min_weight = 0.05;
  int kmeans_iterations = 20;
  std::uint64_t kmeans_seed = 0x5eed;

  double link_threshold_theta = 0.5;
  double klt_link_threshold = 0.2;
  double accept_threshold = 0.05;
  double ds_floor = 0.1;
  double new_track_min_confidence = 0.1;

  int klt_max_features = 50;
  int klt_window = 15;
  int klt_block_size = 3;
  int klt_pyramid_depth = 3;
  int klt_max_iterations = 30;
  double klt_epsilon = 0.01;
  double klt_quality_ratio = 0.01;
  double klt_min_distance = 5.0;
  double klt_min_eigen = 1e-2;
  double klt_max_residual = 40.0;
  bool klt_forward_backward = true;
  double klt_fb_threshold = 1.0;
  int split_min_points = 3;

  int suspension_max_frames = 15;
  double iou_eval_threshold = 0.5;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
    };
    require(epsilon1_px > 0, "epsilon1_px must be positive");
    require(epsilon2_m > 0, "epsilon2_m must be positive");
    require(temporal_window_T > 0, "temporal_window_T must be positive");
    require(model_window_Q > 0, "model_window_Q must be positive");
    require(hist_bins_B > 1, "hist_bins_B must be at least 2");
    require(pyramid_levels_L > 0, "pyramid_levels_L must be positive");
    require(dominant_colors_N > 0, "dominant_colors_N must be positive");
    require(dominant_merge_radius >= 0, "dominant_merge_radius must be non-negative");
    require(dominant_min_weight >= 0 && dominant_min_weight < 1, "dominant_min_weight must be in [0,1)");
    require(kmeans_iterations > 0, "kmeans_iterations must be positive");
    require(link_threshold_theta > 0 && link_threshold_theta < 1, "link_threshold_theta must be in (0,1)");
    require(klt_link_threshold > 0 && klt_link_threshold < 1, "klt_link_threshold must be in (0,1)");
    require(accept_threshold >= 0 && accept_threshold < 1, "accept_threshold must be in [0,1)");
    require(ds_floor > 0 && ds_floor < 1, "ds_floor must be in (0,1)");
    require(klt_max_features > 0, "klt_max_features must be positive");
    require(klt_window >= 3 && klt_window % 2 == 1, "klt_window must be odd and >= 3");
    require(klt_block_size >= 3 && klt_block_size % 2 == 1, "klt_block_size must be odd and >= 3");
    require(klt_pyramid_depth > 0, "klt_pyramid_depth must be positive");
    require(klt_max_iterations > 0, "klt_max_iterations must be positive");
    require(klt_epsilon > 0, "klt_epsilon must be positive");
    require(klt_quality_ratio > 0 && klt_quality_ratio <= 1, "klt_quality_ratio must be in (0,1]");
    require(klt_min_distance >= 0, "klt_min_distance must be non-negative");
    require(klt_min_eigen > 0, "klt_min_eigen must be positive");
    require(klt_max_residual > 0, "klt_max_residual must be positive");
    require(klt_fb_threshold > 0, "klt_fb_threshold must be positive");
    require(split_min_points > 0, "split_min_points must be positive");
    require(suspension_max_frames > 0, "suspension_max_frames must be positive");
    require(iou_eval_threshold > 0 && iou_eval_threshold <= 1, "iou_eval_threshold must be in (0,1]");
  }
};

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline double center_distance_2d(const BoundingBox& a, const BoundingBox& b) {
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

/// Ground-plane distance between the foot points (bottom centres) of two boxes.
inline double ground_distance(const Homography& hmg, const BoundingBox& a, const BoundingBox& b) {
  auto project = [&](const BoundingBox& box) {
    const double u = box.cx();
    const double v = box.bottom();
    const double X = hmg[0] * u + hmg[1] * v + hmg[2];
    const double Y = hmg[3] * u + hmg[4] * v + hmg[5];
    const double W = hmg[6] * u + hmg[7] * v + hmg[8];
    return std::array<double, 2>{X / W, Y / W};
  };
  const auto pa = project(a);
  const auto pb = project(b);
  return std::hypot(pa[0] - pb[0], pa[1] - pb[1]);
}

/// True when `b` belongs to the neighbourhood of `a` under the 2D (and, if calibrated, 3D) gates.
inline bool are_neighbors(const BoundingBox& a, const BoundingBox& b, const TrackerConfig& cfg) {
  if (center_distance_2d(a, b) >= cfg.epsilon1_px) return false;
  if (cfg.homography && ground_distance(*cfg.homography, a, b) >= cfg.epsilon2_m) return false;
  return true;
}

}  // namespace tracksel
