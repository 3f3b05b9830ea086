#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracksel/assignment.hpp"
#include "tracksel/core.hpp"

namespace tracksel {

/// One box of a ground-truth or hypothesis track.
struct TrackBox {
  std::int64_t frame = 0;
  std::int64_t id = 0;
  BoundingBox box;
};

struct ClearMot {
  double mota = 0.0;
  double motp = 0.0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t idsw = 0;
  std::size_t matches = 0;
  std::size_t gt_objects = 0;
};

struct Coverage {
  std::size_t mostly_tracked = 0;
  std::size_t partially_tracked = 0;
  std::size_t mostly_lost = 0;
  std::size_t total = 0;

  double mt_percent() const { return total ? 100.0 * double(mostly_tracked) / double(total) : 0.0; }
  double pt_percent() const { return total ? 100.0 * double(partially_tracked) / double(total) : 0.0; }
  double ml_percent() const { return total ? 100.0 * double(mostly_lost) / double(total) : 0.0; }
};

struct EvalReport {
  ClearMot clear;
  Coverage coverage;

  double m_bar() const { return 0.5 * (clear.mota + clear.motp); }
};

namespace detail {

using FrameBoxes = std::map<std::int64_t, std::vector<TrackBox>>;

inline FrameBoxes by_frame(std::span<const TrackBox> boxes, const char* what) {
  FrameBoxes out;
  for (const auto& b : boxes) out[b.frame].push_back(b);
  for (auto& [frame, list] : out) {
    std::sort(list.begin(), list.end(), [](const TrackBox& a, const TrackBox& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < list.size(); ++i)
      if (list[i].id == list[i - 1].id)
        throw std::invalid_argument(std::string("duplicate ") + what + " id " + std::to_string(list[i].id) +
                                    " in frame " + std::to_string(frame));
  }
  return out;
}

/// Per-frame gt -> hyp correspondences following the CLEAR-MOT protocol.
struct MatchTrace {
  ClearMot totals;
  double overlap_sum = 0.0;
  std::map<std::int64_t, std::size_t> gt_frames;    // frames each gt id is present
  std::map<std::int64_t, std::size_t> gt_matched;   // frames each gt id is matched
};

inline MatchTrace trace_matches(std::span<const TrackBox> gt, std::span<const TrackBox> hyp, double iou_thr) {
  const auto gt_frames = by_frame(gt, "ground-truth");
  const auto hyp_frames = by_frame(hyp, "hypothesis");
  std::set<std::int64_t> frames;
  for (const auto& [f, _] : gt_frames) frames.insert(f);
  for (const auto& [f, _] : hyp_frames) frames.insert(f);

  MatchTrace tr;
  std::map<std::int64_t, std::int64_t> last_match;  // gt id -> hyp id of its latest match
  std::map<std::int64_t, std::int64_t> prev_frame_match;
  const std::vector<TrackBox> none;
  for (const auto f : frames) {
    const auto git = gt_frames.find(f);
    const auto hit = hyp_frames.find(f);
    const auto& g = git == gt_frames.end() ? none : git->second;
    const auto& h = hit == hyp_frames.end() ? none : hit->second;
    tr.totals.gt_objects += g.size();
    for (const auto& b : g) ++tr.gt_frames[b.id];

    std::vector<char> g_used(g.size(), 0), h_used(h.size(), 0);
    std::map<std::int64_t, std::int64_t> current;
    auto record = [&](std::size_t gi, std::size_t hj) {
      g_used[gi] = h_used[hj] = 1;
      current[g[gi].id] = h[hj].id;
      tr.overlap_sum += iou(g[gi].box, h[hj].box);
      ++tr.totals.matches;
      ++tr.gt_matched[g[gi].id];
      const auto prev = last_match.find(g[gi].id);
      if (prev != last_match.end() && prev->second != h[hj].id) ++tr.totals.idsw;
      last_match[g[gi].id] = h[hj].id;
    };

    // keep correspondences from the previous frame that are still valid
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      const auto prev = prev_frame_match.find(g[gi].id);
      if (prev == prev_frame_match.end()) continue;
      for (std::size_t hj = 0; hj < h.size(); ++hj)
        if (!h_used[hj] && h[hj].id == prev->second && iou(g[gi].box, h[hj].box) >= iou_thr) {
          record(gi, hj);
          break;
        }
    }

    std::vector<std::size_t> gi_free, hj_free;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g_used[i]) gi_free.push_back(i);
    for (std::size_t j = 0; j < h.size(); ++j)
      if (!h_used[j]) hj_free.push_back(j);
    AssignmentProblem problem{ScoreMatrix(gi_free.size(), hj_free.size()), iou_thr};
    for (std::size_t a = 0; a < gi_free.size(); ++a)
      for (std::size_t b = 0; b < hj_free.size(); ++b) problem.scores(a, b) = iou(g[gi_free[a]].box, h[hj_free[b]].box);
    for (const auto& [a, b] : solve(problem).pairs)
      if (problem.scores(a, b) > 0.0) record(gi_free[a], hj_free[b]);

    for (char u : g_used) tr.totals.fn += !u;
    for (char u : h_used) tr.totals.fp += !u;
    prev_frame_match = std::move(current);
  }
  return tr;
}

}  // namespace detail

/// CLEAR-MOT accuracy and precision. MOTP is the mean IoU of matched pairs (0 when nothing matched).
inline ClearMot clear_mot(std::span<const TrackBox> gt, std::span<const TrackBox> hyp, double iou_thr = 0.5) {
  if (gt.empty()) throw std::invalid_argument("clear_mot: empty ground truth");
  const auto tr = detail::trace_matches(gt, hyp, iou_thr);
  ClearMot out = tr.totals;
  out.mota = 1.0 - double(out.fn + out.fp + out.idsw) / double(out.gt_objects);
  out.motp = out.matches ? tr.overlap_sum / double(out.matches) : 0.0;
  return out;
}

/// Mostly tracked (coverage > 80%), mostly lost (< 20%) and partially tracked ground-truth tracks.
inline Coverage trajectory_coverage(std::span<const TrackBox> gt, std::span<const TrackBox> hyp,
                                    double iou_thr = 0.5) {
  if (gt.empty()) throw std::invalid_argument("trajectory_coverage: empty ground truth");
  const auto tr = detail::trace_matches(gt, hyp, iou_thr);
  Coverage c;
  for (const auto& [id, frames] : tr.gt_frames) {
    const auto it = tr.gt_matched.find(id);
    const std::size_t matched = it == tr.gt_matched.end() ? 0 : it->second;
    // compare as integers: matched/frames > 0.8 <=> 5*matched > 4*frames
    if (5 * matched > 4 * frames)
      ++c.mostly_tracked;
    else if (5 * matched < frames)
      ++c.mostly_lost;
    else
      ++c.partially_tracked;
    ++c.total;
  }
  return c;
}

inline EvalReport evaluate(std::span<const TrackBox> gt, std::span<const TrackBox> hyp, double iou_thr = 0.5) {
  return {clear_mot(gt, hyp, iou_thr), trajectory_coverage(gt, hyp, iou_thr)};
}

}  // namespace tracksel
