#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "tracksel/assignment.hpp"
#include "tracksel/core.hpp"
#include "tracksel/descriptors.hpp"
#include "tracksel/image.hpp"
#include "tracksel/klt.hpp"
#include "tracksel/models.hpp"
#include "tracksel/similarity.hpp"

namespace tracksel {

enum class TrajectoryStatus { Active, Inactivated, Suspended, Terminated };

/// How a detection joined its trajectory.
enum class LinkTag { New, Appearance, Klt };

struct TrackPoint {
  Detection detection;
  LinkTag tag = LinkTag::New;
};

struct Trajectory {
  TrackId id = kUnlabeled;
  std::vector<TrackPoint> history;
  TrajectoryStatus status = TrajectoryStatus::Active;
  std::int64_t last_matched_frame = 0;
  /// Last Q snapshots (with descriptors and weights), oldest first.
  std::vector<ObjectSnapshot> model_window;

  std::int64_t first_frame() const { return history.front().detection.frame_index; }
  /// Time span in frames from the first to the last matched frame.
  std::int64_t length() const { return last_matched_frame - first_frame() + 1; }
  const ObjectSnapshot& last_snapshot() const { return model_window.back(); }
  const BoundingBox& last_box() const { return history.back().detection.bbox; }

  void append(ObjectSnapshot snap, LinkTag tag, int q) {
    history.push_back({snap.detection, tag});
    last_matched_frame = snap.frame();
    model_window.push_back(std::move(snap));
    if (static_cast<int>(model_window.size()) > q) model_window.erase(model_window.begin());
    status = TrajectoryStatus::Active;
  }
};

/// Everything known about one frame. `gray` is derived from `color` when only colour is given.
/// When `tracks` is set it replaces image-based feature tracking for this frame.
struct FrameData {
  std::int64_t frame_index = 0;
  std::optional<ColorFrame> color;
  std::optional<GrayFrame> gray;
  std::optional<std::vector<FeatureTrack>> tracks;
  std::vector<Detection> detections;
};

struct TrackerState {
  std::vector<Trajectory> trajectories;
  TrackId next_id = 0;
  std::int64_t frame_index = -1;
  std::optional<GrayFrame> prev_gray;
  int frame_width = 0;
  int frame_height = 0;
};

struct FrameLink {
  TrackId trajectory = kUnlabeled;
  Detection detection;
  LinkTag tag = LinkTag::New;
};

struct FrameResult {
  std::int64_t frame_index = 0;
  std::vector<FrameLink> links;  // includes the first detection of new trajectories
  std::vector<TrackId> new_tracks;
  std::vector<TrackId> suspended;
  std::vector<TrackId> terminated;
  std::vector<Detection> noise;
  std::vector<Detection> corrected;  // detections judged incorrect and replaced by their split
};

namespace detail {

inline std::vector<LabeledBox> objects_at(const TrackerState& state, std::int64_t frame) {
  std::vector<LabeledBox> out;
  for (const auto& t : state.trajectories)
    if (t.status != TrajectoryStatus::Terminated && t.last_matched_frame == frame && !t.history.empty())
      out.push_back({t.id, t.last_box()});
  return out;
}

struct Candidate {
  TrackerProposal proposal;
  bool selected = false;
};

}  // namespace detail

/// Advances the tracker by one frame: detection evaluation and correction, appearance and KLT
/// proposals, tracker selection, model update, suspension and termination, new trajectories and
/// noise removal.
inline FrameResult process_frame(TrackerState& state, FrameData data, const TrackerConfig& cfg) {
  const std::int64_t t = data.frame_index;
  if (state.frame_index >= 0 && t <= state.frame_index)
    throw std::invalid_argument("frames must be processed in increasing order");
  if (data.color && !data.gray) data.gray = to_gray(*data.color);
  if (!data.gray && !data.tracks) throw std::invalid_argument("frame " + std::to_string(t) + ": no image data and no feature tracks");
  if (data.gray) {
    state.frame_width = data.gray->width;
    state.frame_height = data.gray->height;
  }

  FrameResult result;
  result.frame_index = t;
  for (auto& traj : state.trajectories)
    if (traj.status != TrajectoryStatus::Terminated) traj.status = TrajectoryStatus::Inactivated;

  // 1. feature tracks t-1 -> t and detection evaluation
  const auto prev_objects = detail::objects_at(state, t - 1);
  std::vector<FeatureTrack> tracks;
  if (data.tracks) {
    for (const auto& tr : *data.tracks)
      if (tr.frame == t) tracks.push_back(tr);
  } else if (state.prev_gray && state.frame_index == t - 1 && !prev_objects.empty()) {
    tracks = klt_tracks_between(*state.prev_gray, *data.gray, prev_objects, t, cfg);
  }
  label_features(tracks, prev_objects);

  // 2. correction of incorrect detections
  std::vector<Detection> dets;
  for (auto d : data.detections) {
    d.frame_index = t;
    if (!d.bbox.valid()) throw std::invalid_argument("frame " + std::to_string(t) + ": invalid detection box");
    const auto verdict = evaluate_detection(d, prev_objects, tracks, cfg, data.detections);
    if (verdict.correct) {
      dets.push_back(d);
      continue;
    }
    const int fw = state.frame_width > 0 ? state.frame_width : std::numeric_limits<int>::max();
    const int fh = state.frame_height > 0 ? state.frame_height : std::numeric_limits<int>::max();
    auto parts = split_detection(d, tracks, prev_objects, fw, fh, cfg, verdict.labels);
    if (parts.empty()) {
      dets.push_back(d);
    } else {
      result.corrected.push_back(d);
      for (auto& p : parts) dets.push_back(p);
    }
  }

  // 3. descriptors and discriminative weights
  std::vector<ObjectSnapshot> snaps;
  snaps.reserve(dets.size());
  for (const auto& d : dets) {
    ObjectSnapshot s;
    s.detection = d;
    if (data.color && !pixel_rect(d.bbox, data.color->width, data.color->height).empty())
      s.descriptors = extract_all(*data.color, d.bbox, cfg);
    else
      s.descriptors = extract_shape(d.bbox);
    snaps.push_back(std::move(s));
  }
  std::vector<WeightVector> weights;
  for (const auto& s : snaps) weights.push_back(descriptor_weights(s, snaps, cfg));
  for (std::size_t i = 0; i < snaps.size(); ++i) snaps[i].weights = weights[i];

  // 4. appearance tracker over trajectories inactivated within [t-T, t-1]
  std::vector<std::size_t> window_trajs;
  for (std::size_t j = 0; j < state.trajectories.size(); ++j) {
    const auto& traj = state.trajectories[j];
    if (traj.status == TrajectoryStatus::Terminated) continue;
    if (traj.last_matched_frame >= t - cfg.temporal_window_T && traj.last_matched_frame <= t - 1)
      window_trajs.push_back(j);
  }
  std::map<TrackId, std::vector<detail::Candidate>> proposals;
  {
    AssignmentProblem problem{ScoreMatrix(snaps.size(), window_trajs.size()), cfg.link_threshold_theta};
    for (std::size_t i = 0; i < snaps.size(); ++i)
      for (std::size_t j = 0; j < window_trajs.size(); ++j)
        problem.scores(i, j) = global_similarity(snaps[i], state.trajectories[window_trajs[j]].last_snapshot());
    for (const auto& [i, j] : solve(problem).pairs) {
      TrackerProposal p;
      p.tracker = TrackerKind::Appearance;
      p.trajectory = state.trajectories[window_trajs[j]].id;
      p.detection = i;
      proposals[p.trajectory].push_back({p, false});
    }
  }

  // 5. KLT tracker between t-1 and t
  {
    std::vector<BoundingBox> boxes;
    for (const auto& s : snaps) boxes.push_back(s.box());
    for (const auto& link : klt_propose(boxes, prev_objects, tracks, cfg)) {
      TrackerProposal p;
      p.tracker = TrackerKind::Klt;
      p.trajectory = link.trajectory;
      p.detection = link.detection;
      proposals[p.trajectory].push_back({p, false});
    }
  }

  // 6. tracker selection per trajectory
  std::map<TrackId, std::size_t> index_of;
  for (std::size_t j = 0; j < state.trajectories.size(); ++j) index_of[state.trajectories[j].id] = j;
  std::vector<detail::Candidate> ranked;
  for (auto& [id, cands] : proposals) {
    const auto& traj = state.trajectories[index_of.at(id)];
    const AppearanceModel model(traj.model_window, traj.length(), cfg.model_window_Q);
    std::optional<TrackerProposal> app, klt;
    for (auto& c : cands) {
      const auto scores = model_scores(snaps[c.proposal.detection], model);
      c.proposal.joint_probability = scores.joint();
      c.proposal.evidence = scores.evidence();
      (c.proposal.tracker == TrackerKind::Appearance ? app : klt) = c.proposal;
    }
    const auto chosen = select_tracker(app, klt, cfg.accept_threshold);
    for (auto& c : cands) {
      if (c.proposal.evidence < cfg.accept_threshold) continue;
      c.selected = chosen && chosen->tracker == c.proposal.tracker;
      ranked.push_back(c);
    }
  }

  // 7. resolve detections claimed by several trajectories: selected proposals first, then by
  // joint probability; a trajectory that loses its selected detection may fall back to the
  // other tracker's proposal
  std::sort(ranked.begin(), ranked.end(), [](const detail::Candidate& a, const detail::Candidate& b) {
    if (a.selected != b.selected) return a.selected;
    if (a.proposal.joint_probability != b.proposal.joint_probability)
      return a.proposal.joint_probability > b.proposal.joint_probability;
    return std::tie(a.proposal.trajectory, a.proposal.tracker) < std::tie(b.proposal.trajectory, b.proposal.tracker);
  });
  std::set<TrackId> matched_trajs;
  std::vector<char> det_used(snaps.size(), 0);
  for (const auto& c : ranked) {
    const auto& p = c.proposal;
    if (matched_trajs.count(p.trajectory) || det_used[p.detection]) continue;
    matched_trajs.insert(p.trajectory);
    det_used[p.detection] = 1;
    auto& traj = state.trajectories[index_of.at(p.trajectory)];
    const LinkTag tag = p.tracker == TrackerKind::Appearance ? LinkTag::Appearance : LinkTag::Klt;
    traj.append(snaps[p.detection], tag, cfg.model_window_Q);
    result.links.push_back({traj.id, snaps[p.detection].detection, tag});
  }

  // 8. suspension and termination
  for (auto& traj : state.trajectories) {
    if (traj.status != TrajectoryStatus::Inactivated) continue;
    if (t - traj.last_matched_frame > cfg.suspension_max_frames) {
      traj.status = TrajectoryStatus::Terminated;
      result.terminated.push_back(traj.id);
    } else {
      traj.status = TrajectoryStatus::Suspended;
      result.suspended.push_back(traj.id);
    }
  }

  // 9. new trajectories and noise filtering
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    if (det_used[i]) continue;
    if (is_noise(snaps[i], false)) {
      result.noise.push_back(snaps[i].detection);
      continue;
    }
    if (snaps[i].detection.confidence < cfg.new_track_min_confidence) continue;
    Trajectory traj;
    traj.id = state.next_id++;
    traj.append(snaps[i], LinkTag::New, cfg.model_window_Q);
    result.new_tracks.push_back(traj.id);
    result.links.push_back({traj.id, snaps[i].detection, LinkTag::New});
    state.trajectories.push_back(std::move(traj));
  }

  std::sort(result.links.begin(), result.links.end(),
            [](const FrameLink& a, const FrameLink& b) { return a.trajectory < b.trajectory; });
  state.prev_gray = std::move(data.gray);
  state.frame_index = t;
  return result;
}

/// One output row: a trajectory's box at one frame.
struct TrackRow {
  std::int64_t frame = 0;
  TrackId id = kUnlabeled;
  BoundingBox box;
  double confidence = 1.0;
  LinkTag tag = LinkTag::New;

  friend bool operator==(const TrackRow&, const TrackRow&) = default;
};

/// Rows of all trajectories sorted by (frame, id).
inline std::vector<TrackRow> track_rows(std::span<const Trajectory> trajectories) {
  std::vector<TrackRow> rows;
  for (const auto& traj : trajectories)
    for (const auto& pt : traj.history)
      rows.push_back({pt.detection.frame_index, traj.id, pt.detection.bbox, pt.detection.confidence, pt.tag});
  std::sort(rows.begin(), rows.end(),
            [](const TrackRow& a, const TrackRow& b) { return std::tie(a.frame, a.id) < std::tie(b.frame, b.id); });
  return rows;
}

struct SequenceResult {
  std::vector<Trajectory> trajectories;
  std::vector<FrameResult> frames;

  std::vector<TrackRow> rows() const { return track_rows(trajectories); }
};

/// Runs the tracker over `frame_indices` (increasing), loading each frame on demand.
inline SequenceResult run_sequence(std::span<const std::int64_t> frame_indices,
                                   const std::function<FrameData(std::int64_t)>& load, const TrackerConfig& cfg) {
  cfg.validate();
  TrackerState state;
  SequenceResult out;
  for (const auto f : frame_indices) out.frames.push_back(process_frame(state, load(f), cfg));
  out.trajectories = std::move(state.trajectories);
  return out;
}

inline SequenceResult run_sequence(std::vector<FrameData> frames, const TrackerConfig& cfg) {
  std::sort(frames.begin(), frames.end(),
            [](const FrameData& a, const FrameData& b) { return a.frame_index < b.frame_index; });
  std::vector<std::int64_t> indices;
  for (const auto& f : frames) indices.push_back(f.frame_index);
  std::size_t next = 0;
  return run_sequence(indices, [&](std::int64_t) { return std::move(frames[next++]); }, cfg);
}

}  // namespace tracksel
