#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include "tracksel/io.hpp"
#include "tracksel/pipeline.hpp"

namespace tracksel {

/// Where frame-to-frame motion comes from: a directory of PPM/PGM frames or a feature-track file.
struct MotionSource {
  std::optional<FrameDirectory> frames;
  std::optional<std::vector<FeatureTrack>> tracks;
};

/// Runs the tracker over every frame between the first and last frame that has detections or
/// image data.
inline SequenceResult track_sequence(const DetectionMap& detections, const MotionSource& motion,
                                     const TrackerConfig& cfg) {
  if (!motion.frames && !motion.tracks) throw std::invalid_argument("need frames or feature tracks");
  std::set<std::int64_t> known;
  for (const auto& [f, _] : detections) known.insert(f);
  if (motion.frames) {
    for (const auto& [f, _] : motion.frames->color) known.insert(f);
    for (const auto& [f, _] : motion.frames->gray) known.insert(f);
  }
  std::vector<std::int64_t> indices;
  if (!known.empty())
    for (std::int64_t f = *known.begin(); f <= *known.rbegin(); ++f) indices.push_back(f);

  std::map<std::int64_t, std::vector<FeatureTrack>> tracks_by_frame;
  if (motion.tracks)
    for (const auto& t : *motion.tracks) tracks_by_frame[t.frame].push_back(t);

  return run_sequence(
      indices,
      [&](std::int64_t f) {
        FrameData data;
        data.frame_index = f;
        if (const auto it = detections.find(f); it != detections.end()) data.detections = it->second;
        if (motion.frames) {
          if (!motion.frames->has(f))
            throw IoError("missing image for frame " + std::to_string(f));
          motion.frames->load_into(data);
        }
        if (motion.tracks) {
          const auto it = tracks_by_frame.find(f);
          data.tracks = it == tracks_by_frame.end() ? std::vector<FeatureTrack>{} : it->second;
        }
        return data;
      },
      cfg);
}

}  // namespace tracksel
