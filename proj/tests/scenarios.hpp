#pragma once

// Synthetic sequences shared by the pipeline tests and the acceptance suite.

#include <cstdint>
#include <map>
#include <vector>

#include "tracksel/tracksel.hpp"

namespace scenario {

inline std::vector<tracksel::FrameData> frames_from_spec(const tracksel::SynthSpec& spec) {
  std::map<std::int64_t, std::vector<tracksel::Detection>> dets;
  for (const auto& r : tracksel::synth_detections(spec)) dets[r.frame].push_back({r.frame, r.box, r.confidence});
  std::vector<tracksel::FrameData> frames;
  for (std::int64_t f = 1; f <= spec.frames; ++f) {
    tracksel::FrameData d;
    d.frame_index = f;
    d.color = tracksel::render_frame(spec, f);
    d.detections = dets[f];
    frames.push_back(std::move(d));
  }
  return frames;
}

inline std::vector<tracksel::TrackBox> ground_truth(const tracksel::SynthSpec& spec) {
  std::vector<tracksel::TrackBox> out;
  for (const auto& r : tracksel::synth_ground_truth(spec)) out.push_back({r.frame, r.id, r.box});
  return out;
}

inline std::vector<tracksel::TrackBox> hypotheses(std::span<const tracksel::TrackRow> rows) {
  std::vector<tracksel::TrackBox> out;
  for (const auto& r : rows) out.push_back({r.frame, r.id, r.box});
  return out;
}

inline tracksel::SynthObject object(double x0, double y0, double vx, double vy, int w, int h, tracksel::Rgb color,
                                    std::uint64_t texture_seed) {
  tracksel::SynthObject o;
  o.x0 = x0;
  o.y0 = y0;
  o.vx = vx;
  o.vy = vy;
  o.w = w;
  o.h = h;
  o.color = color;
  o.texture_seed = texture_seed;
  return o;
}

}  // namespace scenario
