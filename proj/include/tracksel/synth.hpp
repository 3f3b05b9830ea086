#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracksel/core.hpp"
#include "tracksel/image.hpp"
#include "tracksel/io.hpp"

namespace tracksel {

/// A textured rectangle moving on a straight line.
struct SynthObject {
  double x0 = 0, y0 = 0;  // position at first_frame
  double vx = 0, vy = 0;  // pixels per frame
  int w = 20, h = 50;
  Rgb color{200, 50, 50};
  std::uint64_t texture_seed = 1;
  std::int64_t first_frame = 1;
  std::int64_t last_frame = -1;  // -1: until the end of the sequence
};

/// Frames during which the detector reports objects `a` and `b` as their union box.
struct MergeEvent {
  std::size_t a = 0, b = 0;
  std::int64_t first = 0, last = 0;
};

struct SynthSpec {
  int width = 320;
  int height = 240;
  std::int64_t frames = 100;
  Rgb background{128, 128, 128};
  double texture_amplitude = 60.0;
  double pixel_noise = 2.0;  // std-dev of independent per-channel sensor noise, grey levels
  double jitter = 0.0;       // std-dev of detection box noise, pixels
  double miss_rate = 0.0;  // probability a visible object is not detected
  std::uint64_t seed = 1;
  std::vector<SynthObject> objects;
  std::vector<MergeEvent> merges;

  void validate() const {
    if (width < 8 || height < 8) throw std::invalid_argument("synth: frame too small");
    if (frames < 0) throw std::invalid_argument("synth: negative frame count");
    if (jitter < 0 || pixel_noise < 0 || miss_rate < 0 || miss_rate > 1)
      throw std::invalid_argument("synth: bad noise settings");
    for (const auto& o : objects)
      if (o.w <= 0 || o.h <= 0) throw std::invalid_argument("synth: object size must be positive");
    for (const auto& m : merges)
      if (m.a >= objects.size() || m.b >= objects.size() || m.a == m.b || m.first > m.last)
        throw std::invalid_argument("synth: bad merge event");
  }
};

namespace detail {

/// Smoothed per-object noise texture in [-1, 1].
inline std::vector<double> object_texture(const SynthObject& o) {
  std::mt19937_64 rng(o.texture_seed);
  std::vector<double> raw(std::size_t(o.w) * o.h);
  for (double& v : raw) v = double(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  std::vector<double> out(raw.size());
  for (int y = 0; y < o.h; ++y)
    for (int x = 0; x < o.w; ++x) {
      double s = 0;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int u = x + dx, v = y + dy;
          if (u < 0 || v < 0 || u >= o.w || v >= o.h) continue;
          s += raw[std::size_t(v) * o.w + u];
          ++n;
        }
      out[std::size_t(y) * o.w + x] = std::clamp(2.0 * s / n, -1.0, 1.0);
    }
  return out;
}

inline double gaussian(std::mt19937_64& rng) {
  const double u1 = (double(rng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = double(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace detail

inline bool object_alive(const SynthObject& o, std::int64_t frame, std::int64_t frames) {
  const std::int64_t last = o.last_frame < 0 ? frames : o.last_frame;
  return frame >= o.first_frame && frame <= last;
}

/// Integer box of object `o` at `frame` (unclipped).
inline BoundingBox object_box(const SynthObject& o, std::int64_t frame) {
  const double dt = double(frame - o.first_frame);
  return {std::round(o.x0 + o.vx * dt), std::round(o.y0 + o.vy * dt), double(o.w), double(o.h)};
}

inline std::optional<BoundingBox> clip_to_frame(const BoundingBox& b, int width, int height) {
  const double x0 = std::max(0.0, b.x), y0 = std::max(0.0, b.y);
  const double x1 = std::min<double>(width, b.right()), y1 = std::min<double>(height, b.bottom());
  if (x1 - x0 < 1.0 || y1 - y0 < 1.0) return std::nullopt;
  return BoundingBox{x0, y0, x1 - x0, y1 - y0};
}

/// Renders frame `frame` (1-based). Later objects are drawn over earlier ones, then sensor noise
/// drawn from a stream seeded by (seed, frame) is added to every channel.
inline ColorFrame render_frame(const SynthSpec& spec, std::int64_t frame) {
  std::vector<double> level(std::size_t(spec.width) * spec.height * 3);
  for (std::size_t i = 0; i < level.size(); ++i) level[i] = spec.background[i % 3];
  for (const auto& o : spec.objects) {
    if (!object_alive(o, frame, spec.frames)) continue;
    const auto tex = detail::object_texture(o);
    const BoundingBox b = object_box(o, frame);
    const int bx = static_cast<int>(b.x), by = static_cast<int>(b.y);
    for (int v = 0; v < o.h; ++v)
      for (int u = 0; u < o.w; ++u) {
        const int x = bx + u, y = by + v;
        if (x < 0 || y < 0 || x >= spec.width || y >= spec.height) continue;
        const double t = spec.texture_amplitude * tex[std::size_t(v) * o.w + u];
        for (int c = 0; c < 3; ++c) level[(std::size_t(y) * spec.width + x) * 3 + c] = o.color[c] + t;
      }
  }
  if (spec.pixel_noise > 0) {
    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ull ^ std::uint64_t(frame));
    for (double& v : level) v += spec.pixel_noise * detail::gaussian(rng);
  }
  ColorFrame img(spec.width, spec.height, spec.background);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y)[c] = static_cast<std::uint8_t>(
            std::clamp(std::lround(level[(std::size_t(y) * spec.width + x) * 3 + c]), 0L, 255L));
  return img;
}

/// Exact ground-truth boxes (clipped to the frame), id = object index.
inline std::vector<MotRow> synth_ground_truth(const SynthSpec& spec) {
  std::vector<MotRow> rows;
  for (std::int64_t f = 1; f <= spec.frames; ++f)
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      if (!object_alive(spec.objects[i], f, spec.frames)) continue;
      if (const auto b = clip_to_frame(object_box(spec.objects[i], f), spec.width, spec.height))
        rows.push_back({f, std::int64_t(i), *b, 1.0});
    }
  return rows;
}

/// Detector output: ground truth with jitter, merge events and misses; id is always -1.
inline std::vector<MotRow> synth_detections(const SynthSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<MotRow> rows;
  auto jittered = [&](BoundingBox b) {
    if (spec.jitter > 0) {
      b.x += spec.jitter * detail::gaussian(rng);
      b.y += spec.jitter * detail::gaussian(rng);
      b.w = std::max(2.0, b.w + spec.jitter * detail::gaussian(rng));
      b.h = std::max(2.0, b.h + spec.jitter * detail::gaussian(rng));
    }
    return clip_to_frame(b, spec.width, spec.height);
  };
  for (std::int64_t f = 1; f <= spec.frames; ++f) {
    std::vector<std::optional<BoundingBox>> boxes(spec.objects.size());
    for (std::size_t i = 0; i < spec.objects.size(); ++i)
      if (object_alive(spec.objects[i], f, spec.frames))
        boxes[i] = clip_to_frame(object_box(spec.objects[i], f), spec.width, spec.height);
    std::vector<char> consumed(spec.objects.size(), 0);
    std::vector<BoundingBox> out;
    for (const auto& m : spec.merges) {
      if (f < m.first || f > m.last || !boxes[m.a] || !boxes[m.b] || consumed[m.a] || consumed[m.b]) continue;
      const BoundingBox& a = *boxes[m.a];
      const BoundingBox& b = *boxes[m.b];
      const double x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
      out.push_back({x0, y0, std::max(a.right(), b.right()) - x0, std::max(a.bottom(), b.bottom()) - y0});
      consumed[m.a] = consumed[m.b] = 1;
    }
    for (std::size_t i = 0; i < spec.objects.size(); ++i)
      if (boxes[i] && !consumed[i]) out.push_back(*boxes[i]);
    for (const auto& b : out) {
      const bool missed = spec.miss_rate > 0 && double(rng() >> 11) * 0x1.0p-53 < spec.miss_rate;
      if (missed) continue;
      if (const auto j = jittered(b)) rows.push_back({f, -1, *j, 1.0});
    }
  }
  return rows;
}

inline SynthSpec parse_synth_spec(const std::filesystem::path& path) {
  SynthSpec spec;
  for (const auto& [key, value] : detail::read_key_values(path)) {
    std::istringstream ss(value);
    auto need = [&](auto& field) {
      if (!(ss >> field)) throw ParseError("synth spec key '" + key + "': bad value '" + value + "'");
    };
    if (key == "width") {
      need(spec.width);
    } else if (key == "height") {
      need(spec.height);
    } else if (key == "frames") {
      need(spec.frames);
    } else if (key == "seed") {
      need(spec.seed);
    } else if (key == "jitter") {
      need(spec.jitter);
    } else if (key == "pixel_noise") {
      need(spec.pixel_noise);
    } else if (key == "miss_rate") {
      need(spec.miss_rate);
    } else if (key == "texture_amplitude") {
      need(spec.texture_amplitude);
    } else if (key == "background") {
      int r, g, b;
      need(r), need(g), need(b);
      spec.background = {std::uint8_t(std::clamp(r, 0, 255)), std::uint8_t(std::clamp(g, 0, 255)),
                         std::uint8_t(std::clamp(b, 0, 255))};
    } else if (key == "object") {
      // x0 y0 vx vy w h r g b texture_seed [first_frame last_frame]
      SynthObject o;
      int r, g, b;
      need(o.x0), need(o.y0), need(o.vx), need(o.vy), need(o.w), need(o.h), need(r), need(g), need(b);
      need(o.texture_seed);
      o.color = {std::uint8_t(std::clamp(r, 0, 255)), std::uint8_t(std::clamp(g, 0, 255)),
                 std::uint8_t(std::clamp(b, 0, 255))};
      if (ss >> o.first_frame) need(o.last_frame);
      spec.objects.push_back(o);
    } else if (key == "merge") {
      MergeEvent m;
      need(m.a), need(m.b), need(m.first), need(m.last);
      spec.merges.push_back(m);
    } else {
      throw ParseError("unknown synth spec key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

/// Writes frames/NNNNNN.ppm, det.csv and gt.csv under `dir`.
inline void generate_synthetic(const SynthSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  std::filesystem::create_directories(dir / "frames");
  for (std::int64_t f = 1; f <= spec.frames; ++f)
    write_ppm(dir / "frames" / frame_filename(f, ".ppm"), render_frame(spec, f));
  write_mot_csv(dir / "det.csv", synth_detections(spec));
  write_mot_csv(dir / "gt.csv", synth_ground_truth(spec));
}

}  // namespace tracksel
