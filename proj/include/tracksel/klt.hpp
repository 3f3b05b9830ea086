#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "tracksel/assignment.hpp"
#include "tracksel/core.hpp"
#include "tracksel/image.hpp"

namespace tracksel {

using TrackId = std::int64_t;
inline constexpr TrackId kUnlabeled = -1;

enum class PointStatus { Tracked, Lost };

/// Feature location in box coordinates (the centre of pixel (i, j) is at (i + 0.5, j + 0.5)).
struct FeaturePoint {
  double x = 0.0;
  double y = 0.0;
  double quality = 0.0;
  PointStatus status = PointStatus::Tracked;
};

/// One feature followed from frame t-1 to frame t.
struct FeatureTrack {
  std::int64_t frame = 0;  // frame t
  double x_prev = 0.0;
  double y_prev = 0.0;
  double x = 0.0;
  double y = 0.0;
  TrackId label = kUnlabeled;

  friend bool operator==(const FeatureTrack&, const FeatureTrack&) = default;
};

/// A tracked object's box at some frame.
struct LabeledBox {
  TrackId id = kUnlabeled;
  BoundingBox box;
};

// ---------------------------------------------------------------------------------------------
// Feature selection

namespace detail {

struct Gradients {
  int width = 0, height = 0;
  std::vector<double> gx, gy;
  double x(int i, int j) const { return gx[std::size_t(j) * width + i]; }
  double y(int i, int j) const { return gy[std::size_t(j) * width + i]; }
};

inline Gradients central_gradients(const GrayFrame& f) {
  Gradients g{f.width, f.height, std::vector<double>(f.pixels.size()), std::vector<double>(f.pixels.size())};
  for (int j = 0; j < f.height; ++j)
    for (int i = 0; i < f.width; ++i) {
      const std::size_t k = std::size_t(j) * f.width + i;
      g.gx[k] = 0.5 * (f.clamped(i + 1, j) - f.clamped(i - 1, j));
      g.gy[k] = 0.5 * (f.clamped(i, j + 1) - f.clamped(i, j - 1));
    }
  return g;
}

inline double min_eigenvalue(double gxx, double gxy, double gyy) {
  const double half_trace = 0.5 * (gxx + gyy);
  const double det_term = std::sqrt(std::max(0.0, 0.25 * (gxx - gyy) * (gxx - gyy) + gxy * gxy));
  return half_trace - det_term;
}

}  // namespace detail

/// Shi-Tomasi corners inside `b`: minimum eigenvalue of the structure tensor summed over a
/// block_size window, 3x3 non-maximum suppression, a relative quality threshold, greedy minimum
/// spacing and a cap on the number of features.
inline std::vector<FeaturePoint> detect_features(const GrayFrame& f, const BoundingBox& b, const TrackerConfig& cfg) {
  const PixelRect r = pixel_rect(b, f.width, f.height);
  if (!b.valid() || r.empty()) throw std::invalid_argument("detect_features: box lies outside the frame");

  const int half = cfg.klt_block_size / 2;
  // gradients over the box plus a margin for the block sums
  const int gx0 = std::max(0, r.x0 - half - 1), gy0 = std::max(0, r.y0 - half - 1);
  const int gx1 = std::min(f.width, r.x1 + half + 1), gy1 = std::min(f.height, r.y1 + half + 1);
  const int gw = gx1 - gx0, gh = gy1 - gy0;
  std::vector<double> ixx(std::size_t(gw) * gh), ixy(ixx.size()), iyy(ixx.size());
  for (int j = gy0; j < gy1; ++j)
    for (int i = gx0; i < gx1; ++i) {
      const double dx = 0.5 * (f.clamped(i + 1, j) - f.clamped(i - 1, j));
      const double dy = 0.5 * (f.clamped(i, j + 1) - f.clamped(i, j - 1));
      const std::size_t k = std::size_t(j - gy0) * gw + (i - gx0);
      ixx[k] = dx * dx;
      ixy[k] = dx * dy;
      iyy[k] = dy * dy;
    }

  const int rw = r.width(), rh = r.height();
  std::vector<double> score(std::size_t(rw) * rh, 0.0);
  double best = 0.0;
  for (int j = r.y0; j < r.y1; ++j)
    for (int i = r.x0; i < r.x1; ++i) {
      double sxx = 0, sxy = 0, syy = 0;
      for (int v = std::max(gy0, j - half); v <= std::min(gy1 - 1, j + half); ++v)
        for (int u = std::max(gx0, i - half); u <= std::min(gx1 - 1, i + half); ++u) {
          const std::size_t k = std::size_t(v - gy0) * gw + (u - gx0);
          sxx += ixx[k];
          sxy += ixy[k];
          syy += iyy[k];
        }
      const double s = detail::min_eigenvalue(sxx, sxy, syy);
      score[std::size_t(j - r.y0) * rw + (i - r.x0)] = s;
      best = std::max(best, s);
    }
  if (best <= 1e-9) return {};

  const double threshold = std::max(cfg.klt_quality_ratio * best, 1e-9);
  auto at = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= rw || j >= rh) return 0.0;
    return score[std::size_t(j) * rw + i];
  };
  struct Candidate {
    double s;
    int i, j;
  };
  std::vector<Candidate> candidates;
  for (int j = 0; j < rh; ++j)
    for (int i = 0; i < rw; ++i) {
      const double s = at(i, j);
      if (s < threshold) continue;
      bool is_max = true;
      for (int dj = -1; dj <= 1 && is_max; ++dj)
        for (int di = -1; di <= 1; ++di)
          if ((di || dj) && at(i + di, j + dj) > s) {
            is_max = false;
            break;
          }
      if (is_max) candidates.push_back({s, i + r.x0, j + r.y0});
    }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.s != b.s) return a.s > b.s;
    return std::tie(a.j, a.i) < std::tie(b.j, b.i);
  });

  std::vector<FeaturePoint> out;
  const double min_d2 = cfg.klt_min_distance * cfg.klt_min_distance;
  for (const auto& c : candidates) {
    if (static_cast<int>(out.size()) >= cfg.klt_max_features) break;
    const double x = c.i + 0.5, y = c.j + 0.5;
    const bool crowded = std::any_of(out.begin(), out.end(), [&](const FeaturePoint& p) {
      return (p.x - x) * (p.x - x) + (p.y - y) * (p.y - y) < min_d2;
    });
    if (!crowded) out.push_back({x, y, c.s, PointStatus::Tracked});
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Pyramidal Lucas-Kanade

/// Gaussian image pyramid with per-level central-difference gradients.
class ImagePyramid {
 public:
  ImagePyramid(const GrayFrame& base, int depth) {
    levels_.push_back(base);
    for (int l = 1; l < depth; ++l) {
      const GrayFrame& src = levels_.back();
      if (src.width < 8 || src.height < 8) break;
      levels_.push_back(downsample(src));
    }
    for (const auto& lv : levels_) grads_.push_back(detail::central_gradients(lv));
  }

  int depth() const { return static_cast<int>(levels_.size()); }
  const GrayFrame& level(int l) const { return levels_[l]; }

  double grad_x(int l, double x, double y) const { return sample(grads_[l].gx, l, x, y); }
  double grad_y(int l, double x, double y) const { return sample(grads_[l].gy, l, x, y); }

 private:
  double sample(const std::vector<double>& img, int l, double x, double y) const {
    const int w = levels_[l].width, h = levels_[l].height;
    const double fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double ax = x - fx, ay = y - fy;
    auto px = [&](int i, int j) { return img[std::size_t(std::clamp(j, 0, h - 1)) * w + std::clamp(i, 0, w - 1)]; };
    return (1 - ay) * ((1 - ax) * px(x0, y0) + ax * px(x0 + 1, y0)) +
           ay * ((1 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1));
  }

  static GrayFrame downsample(const GrayFrame& src) {
    static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    GrayFrame tmp(src.width, src.height);
    for (int j = 0; j < src.height; ++j)
      for (int i = 0; i < src.width; ++i) {
        double s = 0;
        for (int t = -2; t <= 2; ++t) s += k[t + 2] * src.clamped(i + t, j);
        tmp.at(i, j) = s;
      }
    GrayFrame out((src.width + 1) / 2, (src.height + 1) / 2);
    for (int j = 0; j < out.height; ++j)
      for (int i = 0; i < out.width; ++i) {
        double s = 0;
        for (int t = -2; t <= 2; ++t) s += k[t + 2] * tmp.clamped(2 * i, 2 * j + t);
        out.at(i, j) = s;
      }
    return out;
  }

  std::vector<GrayFrame> levels_;
  std::vector<detail::Gradients> grads_;
};

namespace detail {

struct LkResult {
  double x = 0.0, y = 0.0;
  bool ok = false;
};

/// Tracks one point given in sample coordinates (pixel (i, j) at (i, j)).
inline LkResult lk_track_point(const ImagePyramid& prev, const ImagePyramid& next, double px, double py,
                               const TrackerConfig& cfg) {
  const int half = cfg.klt_window / 2;
  const int depth = std::min(prev.depth(), next.depth());
  const double n_px = double(cfg.klt_window) * cfg.klt_window;
  double gx = 0.0, gy = 0.0;  // guess carried between levels
  std::vector<double> tmpl(std::size_t(cfg.klt_window) * cfg.klt_window), dxs(tmpl.size()), dys(tmpl.size());

  for (int l = depth - 1; l >= 0; --l) {
    const double scale = std::ldexp(1.0, -l);
    const double ux = px * scale, uy = py * scale;
    const GrayFrame& I = prev.level(l);
    const GrayFrame& J = next.level(l);

    double gxx = 0, gxy = 0, gyy = 0;
    std::size_t k = 0;
    for (int v = -half; v <= half; ++v)
      for (int u = -half; u <= half; ++u, ++k) {
        const double sx = ux + u, sy = uy + v;
        tmpl[k] = I.sample(sx, sy);
        dxs[k] = prev.grad_x(l, sx, sy);
        dys[k] = prev.grad_y(l, sx, sy);
        gxx += dxs[k] * dxs[k];
        gxy += dxs[k] * dys[k];
        gyy += dys[k] * dys[k];
      }
    if (min_eigenvalue(gxx, gxy, gyy) / n_px < cfg.klt_min_eigen) return {};
    const double det = gxx * gyy - gxy * gxy;
    if (std::abs(det) < 1e-12) return {};

    double nx = 0.0, ny = 0.0;
    for (int it = 0; it < cfg.klt_max_iterations; ++it) {
      double ex = 0, ey = 0;
      k = 0;
      for (int v = -half; v <= half; ++v)
        for (int u = -half; u <= half; ++u, ++k) {
          const double diff = tmpl[k] - J.sample(ux + gx + nx + u, uy + gy + ny + v);
          ex += diff * dxs[k];
          ey += diff * dys[k];
        }
      const double ddx = (gyy * ex - gxy * ey) / det;
      const double ddy = (gxx * ey - gxy * ex) / det;
      nx += ddx;
      ny += ddy;
      if (!std::isfinite(nx) || !std::isfinite(ny)) return {};
      if (ddx * ddx + ddy * ddy < cfg.klt_epsilon * cfg.klt_epsilon) break;
    }
    if (l > 0) {
      gx = 2.0 * (gx + nx);
      gy = 2.0 * (gy + ny);
    } else {
      gx += nx;
      gy += ny;
    }
  }

  LkResult res{px + gx, py + gy, true};
  const GrayFrame& I0 = prev.level(0);
  if (res.x < 0 || res.y < 0 || res.x > I0.width - 1 || res.y > I0.height - 1) return {};
  double residual = 0.0;
  for (int v = -half; v <= half; ++v)
    for (int u = -half; u <= half; ++u)
      residual += std::abs(I0.sample(px + u, py + v) - next.level(0).sample(res.x + u, res.y + v));
  if (residual / n_px > cfg.klt_max_residual) return {};
  return res;
}

}  // namespace detail

/// Follows each point from `prev` into `next`. Points are in box coordinates; the output keeps the
/// input order and flags failures as Lost (their position is left unchanged).
inline std::vector<FeaturePoint> track_features(const ImagePyramid& prev, const ImagePyramid& next,
                                                std::span<const FeaturePoint> pts, const TrackerConfig& cfg) {
  if (prev.level(0).width != next.level(0).width || prev.level(0).height != next.level(0).height)
    throw std::invalid_argument("track_features: frame sizes differ");
  std::vector<FeaturePoint> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    FeaturePoint q = p;
    auto fwd = detail::lk_track_point(prev, next, p.x - 0.5, p.y - 0.5, cfg);
    bool ok = fwd.ok && p.status == PointStatus::Tracked;
    if (ok && cfg.klt_forward_backward) {
      const auto back = detail::lk_track_point(next, prev, fwd.x, fwd.y, cfg);
      ok = back.ok && std::hypot(back.x - (p.x - 0.5), back.y - (p.y - 0.5)) <= cfg.klt_fb_threshold;
    }
    if (ok) {
      q.x = fwd.x + 0.5;
      q.y = fwd.y + 0.5;
      q.status = PointStatus::Tracked;
    } else {
      q.status = PointStatus::Lost;
    }
    out.push_back(q);
  }
  return out;
}

inline std::vector<FeaturePoint> track_features(const GrayFrame& prev, const GrayFrame& next,
                                                std::span<const FeaturePoint> pts, const TrackerConfig& cfg) {
  if (prev.width != next.width || prev.height != next.height)
    throw std::invalid_argument("track_features: frame sizes differ");
  return track_features(ImagePyramid(prev, cfg.klt_pyramid_depth), ImagePyramid(next, cfg.klt_pyramid_depth), pts,
                        cfg);
}

/// Detects features inside every t-1 object box and follows them into frame t. Only successfully
/// tracked features are returned, unlabeled.
inline std::vector<FeatureTrack> klt_tracks_between(const GrayFrame& prev, const GrayFrame& next,
                                                    std::span<const LabeledBox> prev_objects, std::int64_t frame,
                                                    const TrackerConfig& cfg) {
  std::vector<FeaturePoint> seeds;
  std::set<std::pair<double, double>> seen;
  for (const auto& obj : prev_objects) {
    if (pixel_rect(obj.box, prev.width, prev.height).empty()) continue;
    for (const auto& p : detect_features(prev, obj.box, cfg))
      if (seen.insert({p.x, p.y}).second) seeds.push_back(p);
  }
  std::vector<FeatureTrack> out;
  if (seeds.empty()) return out;
  const auto moved = track_features(prev, next, seeds, cfg);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    if (moved[i].status == PointStatus::Tracked)
      out.push_back({frame, seeds[i].x, seeds[i].y, moved[i].x, moved[i].y, kUnlabeled});
  return out;
}

// ---------------------------------------------------------------------------------------------
// Labelling, detection evaluation and correction

/// Labels every track with the id of the t-1 box holding its t-1 position; a point inside several
/// boxes goes to the one whose centre is nearest (lower id on exact ties).
inline void label_features(std::span<FeatureTrack> tracks, std::span<const LabeledBox> prev_objects) {
  for (auto& t : tracks) {
    t.label = kUnlabeled;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& obj : prev_objects) {
      if (!obj.box.contains(t.x_prev, t.y_prev)) continue;
      const double d = std::hypot(t.x_prev - obj.box.cx(), t.y_prev - obj.box.cy());
      if (d < best || (d == best && obj.id < t.label)) {
        best = d;
        t.label = obj.id;
      }
    }
  }
}

struct DetectionVerdict {
  bool correct = true;
  std::vector<TrackId> labels;  // distinct labels found inside an incorrect detection, ascending
};

/// Labels carried by at least `min_points` tracks ending inside `box`, ascending.
inline std::vector<TrackId> labels_inside(const BoundingBox& box, std::span<const FeatureTrack> tracks,
                                          int min_points) {
  std::map<TrackId, int> counts;
  for (const auto& t : tracks)
    if (t.label != kUnlabeled && box.contains(t.x, t.y)) ++counts[t.label];
  std::vector<TrackId> out;
  for (const auto& [id, n] : counts)
    if (n >= min_points) out.push_back(id);
  return out;
}

/// A detection is incorrect when it overlaps at least two objects of frame t-1 and holds features
/// of at least two different labels. A label whose features mostly fall inside another detection
/// of the same frame belongs to that detection, so two overlapping but separately detected objects
/// are not split.
inline DetectionVerdict evaluate_detection(const Detection& d, std::span<const LabeledBox> prev_objects,
                                           std::span<const FeatureTrack> tracks, const TrackerConfig& cfg,
                                           std::span<const Detection> frame_detections = {}) {
  int overlapped = 0;
  for (const auto& obj : prev_objects)
    if (iou(d.bbox, obj.box) > 0.0) ++overlapped;
  if (overlapped < 2) return {};
  auto labels = labels_inside(d.bbox, tracks, cfg.split_min_points);
  auto count = [&](const BoundingBox& box, TrackId id) {
    return std::count_if(tracks.begin(), tracks.end(),
                         [&](const FeatureTrack& t) { return t.label == id && box.contains(t.x, t.y); });
  };
  std::erase_if(labels, [&](TrackId id) {
    const auto own = count(d.bbox, id);
    return std::any_of(frame_detections.begin(), frame_detections.end(), [&](const Detection& o) {
      return !(o.bbox == d.bbox) && count(o.bbox, id) > own;
    });
  });
  if (labels.size() < 2) return {};
  return {false, std::move(labels)};
}

/// Replaces a merged detection by one box per feature label: the size of that object at t-1,
/// centred on the centroid of its features, clipped to the frame.
inline std::vector<Detection> split_detection(const Detection& d, std::span<const FeatureTrack> tracks,
                                              std::span<const LabeledBox> prev_objects, int frame_w, int frame_h,
                                              const TrackerConfig& cfg, std::span<const TrackId> only = {}) {
  std::map<TrackId, std::vector<const FeatureTrack*>> groups;
  for (const auto& t : tracks)
    if (t.label != kUnlabeled && d.bbox.contains(t.x, t.y) &&
        (only.empty() || std::find(only.begin(), only.end(), t.label) != only.end()))
      groups[t.label].push_back(&t);

  std::vector<Detection> out;
  for (const auto& [id, pts] : groups) {
    if (static_cast<int>(pts.size()) < cfg.split_min_points) continue;
    const auto prev = std::find_if(prev_objects.begin(), prev_objects.end(),
                                   [id = id](const LabeledBox& o) { return o.id == id; });
    if (prev == prev_objects.end()) continue;
    double sx = 0, sy = 0;
    for (const auto* p : pts) {
      sx += p->x;
      sy += p->y;
    }
    const BoundingBox sized = BoundingBox::centered(sx / pts.size(), sy / pts.size(), prev->box.w, prev->box.h);
    const double x0 = std::max(0.0, sized.x), y0 = std::max(0.0, sized.y);
    const double x1 = std::min<double>(frame_w, sized.right()), y1 = std::min<double>(frame_h, sized.bottom());
    if (x1 - x0 < 1.0 || y1 - y0 < 1.0) continue;
    out.push_back({d.frame_index, {x0, y0, x1 - x0, y1 - y0}, d.confidence, SnapshotSource::SplitCorrection});
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// KLT object tracker

inline double klt_similarity(std::size_t shared, std::size_t count_prev, std::size_t count_now) {
  if (count_prev == 0 || count_now == 0) return 0.0;
  return std::min(double(shared) / double(count_prev), double(shared) / double(count_now));
}

/// Feature-flow similarity between an object at t and an object at t-1.
inline double klt_similarity(const BoundingBox& now, const BoundingBox& prev, std::span<const FeatureTrack> tracks) {
  std::size_t shared = 0, count_prev = 0, count_now = 0;
  for (const auto& t : tracks) {
    const bool in_prev = prev.contains(t.x_prev, t.y_prev);
    const bool in_now = now.contains(t.x, t.y);
    count_prev += in_prev;
    count_now += in_now;
    shared += in_prev && in_now;
  }
  return klt_similarity(shared, count_prev, count_now);
}

struct LinkProposal {
  TrackId trajectory = kUnlabeled;
  std::size_t detection = 0;
  double score = 0.0;
};

/// Hungarian matching of the t-1 objects to the detections of frame t on the feature-flow similarity.
inline std::vector<LinkProposal> klt_propose(std::span<const BoundingBox> detections,
                                             std::span<const LabeledBox> prev_objects,
                                             std::span<const FeatureTrack> tracks, const TrackerConfig& cfg) {
  AssignmentProblem problem{ScoreMatrix(prev_objects.size(), detections.size()), cfg.klt_link_threshold};
  for (std::size_t i = 0; i < prev_objects.size(); ++i)
    for (std::size_t j = 0; j < detections.size(); ++j)
      problem.scores(i, j) = klt_similarity(detections[j], prev_objects[i].box, tracks);
  std::vector<LinkProposal> out;
  for (const auto& [i, j] : solve(problem).pairs)
    out.push_back({prev_objects[i].id, j, problem.scores(i, j)});
  return out;
}

}  // namespace tracksel
