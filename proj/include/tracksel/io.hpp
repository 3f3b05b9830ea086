#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tracksel/core.hpp"
#include "tracksel/klt.hpp"
#include "tracksel/metrics.hpp"
#include "tracksel/pipeline.hpp"

namespace tracksel {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

inline bool is_header(std::string_view line) { return line.rfind("frame", 0) == 0; }

}  // namespace detail

/// One line of the MOT-style CSV `frame,id,x,y,w,h,conf` (extra trailing columns are ignored).
struct MotRow {
  std::int64_t frame = 0;
  std::int64_t id = -1;
  BoundingBox box;
  double confidence = 1.0;
};

inline std::vector<MotRow> parse_mot_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<MotRow> rows;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(path.string() + ": " + what + ", line " + std::to_string(line_no));
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#' || (line_no == 1 && detail::is_header(body))) continue;
    const auto f = detail::split_fields(body, ',');
    if (f.size() < 6) fail("expected at least 6 fields");
    MotRow r;
    double frame = 0, id = 0;
    if (!detail::parse_number(f[0], frame) || frame != std::floor(frame) || frame < 0) fail("bad frame index");
    if (!detail::parse_number(f[1], id) || id != std::floor(id)) fail("bad id");
    r.frame = static_cast<std::int64_t>(frame);
    r.id = static_cast<std::int64_t>(id);
    if (!detail::parse_number(f[2], r.box.x) || !detail::parse_number(f[3], r.box.y) ||
        !detail::parse_number(f[4], r.box.w) || !detail::parse_number(f[5], r.box.h))
      fail("bad box coordinates");
    if (f.size() > 6 && !detail::parse_number(f[6], r.confidence)) fail("bad confidence");
    if (!std::isfinite(r.box.x) || !std::isfinite(r.box.y) || !std::isfinite(r.box.w) || !std::isfinite(r.box.h))
      fail("non-finite coordinates");
    if (r.box.w <= 0 || r.box.h <= 0) fail("non-positive size");
    rows.push_back(r);
  }
  return rows;
}

using DetectionMap = std::map<std::int64_t, std::vector<Detection>>;

/// Raw detections grouped by frame.
inline DetectionMap parse_detections(const std::filesystem::path& path) {
  DetectionMap out;
  for (const auto& r : parse_mot_csv(path)) out[r.frame].push_back({r.frame, r.box, r.confidence});
  return out;
}

/// Track boxes (ground truth or tracker output) for evaluation.
inline std::vector<TrackBox> parse_track_boxes(const std::filesystem::path& path) {
  std::vector<TrackBox> out;
  for (const auto& r : parse_mot_csv(path)) out.push_back({r.frame, r.id, r.box});
  return out;
}

inline const char* tag_name(LinkTag tag) {
  switch (tag) {
    case LinkTag::Appearance: return "A";
    case LinkTag::Klt: return "K";
    case LinkTag::New: return "new";
  }
  return "new";
}

inline std::filesystem::path tags_path_for(const std::filesystem::path& tracks_path) {
  auto p = tracks_path;
  p.replace_extension(".tags.csv");
  return p;
}

inline void write_mot_csv(const std::filesystem::path& path, std::span<const MotRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,id,x,y,w,h,conf\n";
  for (const auto& r : rows) {
    out << r.frame << ',' << r.id << ',' << detail::format_number(r.box.x) << ',' << detail::format_number(r.box.y)
        << ',' << detail::format_number(r.box.w) << ',' << detail::format_number(r.box.h) << ','
        << detail::format_number(r.confidence) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Writes the track CSV and its sidecar `frame,id,tracker` file (tracker is A, K or new).
inline void write_tracks(std::span<const TrackRow> rows, const std::filesystem::path& path) {
  std::vector<TrackRow> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const TrackRow& a, const TrackRow& b) { return std::tie(a.frame, a.id) < std::tie(b.frame, b.id); });
  std::vector<MotRow> mot;
  for (const auto& r : sorted) mot.push_back({r.frame, r.id, r.box, r.confidence});
  write_mot_csv(path, mot);

  const auto tags = tags_path_for(path);
  std::ofstream out(tags);
  if (!out) throw IoError("cannot write " + tags.string());
  out << "frame,id,tracker\n";
  for (const auto& r : sorted) out << r.frame << ',' << r.id << ',' << tag_name(r.tag) << '\n';
  if (!out) throw IoError("write failed: " + tags.string());
}

/// Reads a track CSV and, when present, its tag sidecar.
inline std::vector<TrackRow> read_tracks(const std::filesystem::path& path) {
  std::vector<TrackRow> rows;
  for (const auto& r : parse_mot_csv(path)) rows.push_back({r.frame, r.id, r.box, r.confidence, LinkTag::New});
  const auto tags = tags_path_for(path);
  if (!std::filesystem::exists(tags)) return rows;
  std::map<std::pair<std::int64_t, std::int64_t>, LinkTag> by_key;
  auto in = detail::open_input(tags);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || (line_no == 1 && detail::is_header(body))) continue;
    const auto f = detail::split_fields(body, ',');
    std::int64_t frame = 0, id = 0;
    if (f.size() != 3 || !detail::parse_number(f[0], frame) || !detail::parse_number(f[1], id))
      throw ParseError(tags.string() + ": malformed tag line, line " + std::to_string(line_no));
    LinkTag tag = LinkTag::New;
    if (f[2] == "A")
      tag = LinkTag::Appearance;
    else if (f[2] == "K")
      tag = LinkTag::Klt;
    else if (f[2] != "new")
      throw ParseError(tags.string() + ": unknown tracker tag, line " + std::to_string(line_no));
    by_key[{frame, id}] = tag;
  }
  for (auto& r : rows) {
    const auto it = by_key.find({r.frame, r.id});
    if (it != by_key.end()) r.tag = it->second;
  }
  return rows;
}

/// Precomputed feature tracks: lines `frame_t, x_prev, y_prev, x_t, y_t`.
inline std::vector<FeatureTrack> parse_feature_tracks(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<FeatureTrack> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#' || (line_no == 1 && detail::is_header(body))) continue;
    const auto f = detail::split_fields(body, ',');
    FeatureTrack t;
    double frame = 0;
    if (f.size() != 5 || !detail::parse_number(f[0], frame) || frame != std::floor(frame) ||
        !detail::parse_number(f[1], t.x_prev) || !detail::parse_number(f[2], t.y_prev) ||
        !detail::parse_number(f[3], t.x) || !detail::parse_number(f[4], t.y))
      throw ParseError(path.string() + ": malformed feature track, line " + std::to_string(line_no));
    t.frame = static_cast<std::int64_t>(frame);
    out.push_back(t);
  }
  return out;
}

inline void write_feature_tracks(const std::filesystem::path& path, std::span<const FeatureTrack> tracks) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : tracks)
    out << t.frame << ',' << detail::format_number(t.x_prev) << ',' << detail::format_number(t.y_prev) << ','
        << detail::format_number(t.x) << ',' << detail::format_number(t.y) << '\n';
}

// ---------------------------------------------------------------------------------------------
// Configuration

namespace detail {

/// Reads `key = value` lines; '#' starts a comment. Repeated keys keep every value in order.
inline std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(path.string() + ": expected 'key = value', line " + std::to_string(line_no));
    out.emplace_back(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
  }
  return out;
}

}  // namespace detail

inline void apply_config_value(TrackerConfig& cfg, const std::string& key, const std::string& value) {
  auto as_double = [&](double& field) {
    if (!detail::parse_number(value, field)) throw ParseError("config key '" + key + "': not a number");
  };
  auto as_int = [&](int& field) {
    if (!detail::parse_number(value, field)) throw ParseError("config key '" + key + "': not an integer");
  };
  if (key == "epsilon1_px") return as_double(cfg.epsilon1_px);
  if (key == "epsilon2_m") return as_double(cfg.epsilon2_m);
  if (key == "homography") {
    std::istringstream ss(value);
    Homography h{};
    for (double& v : h)
      if (!(ss >> v)) throw ParseError("config key 'homography': expected 9 numbers");
    std::string extra;
    if (ss >> extra) throw ParseError("config key 'homography': expected 9 numbers");
    cfg.homography = h;
    return;
  }
  if (key == "temporal_window_T") return as_int(cfg.temporal_window_T);
  if (key == "model_window_Q") return as_int(cfg.model_window_Q);
  if (key == "hist_bins_B") return as_int(cfg.hist_bins_B);
  if (key == "pyramid_levels_L") return as_int(cfg.pyramid_levels_L);
  if (key == "dominant_colors_N") return as_int(cfg.dominant_colors_N);
  if (key == "dominant_merge_radius") return as_double(cfg.dominant_merge_radius);
  if (key == "dominant_min_weight") return as_double(cfg.dominant_min_weight);
  if (key == "kmeans_iterations") return as_int(cfg.kmeans_iterations);
  if (key == "kmeans_seed") {
    if (!detail::parse_number(value, cfg.kmeans_seed)) throw ParseError("config key 'kmeans_seed': not an integer");
    return;
  }
  if (key == "link_threshold_theta") return as_double(cfg.link_threshold_theta);
  if (key == "klt_link_threshold") return as_double(cfg.klt_link_threshold);
  if (key == "accept_threshold") return as_double(cfg.accept_threshold);
  if (key == "ds_floor") return as_double(cfg.ds_floor);
  if (key == "new_track_min_confidence") return as_double(cfg.new_track_min_confidence);
  if (key == "klt_max_features") return as_int(cfg.klt_max_features);
  if (key == "klt_window") return as_int(cfg.klt_window);
  if (key == "klt_block_size") return as_int(cfg.klt_block_size);
  if (key == "klt_pyramid_depth") return as_int(cfg.klt_pyramid_depth);
  if (key == "klt_max_iterations") return as_int(cfg.klt_max_iterations);
  if (key == "klt_epsilon") return as_double(cfg.klt_epsilon);
  if (key == "klt_quality_ratio") return as_double(cfg.klt_quality_ratio);
  if (key == "klt_min_distance") return as_double(cfg.klt_min_distance);
  if (key == "klt_min_eigen") return as_double(cfg.klt_min_eigen);
  if (key == "klt_max_residual") return as_double(cfg.klt_max_residual);
  if (key == "klt_forward_backward") {
    if (value == "true" || value == "1") cfg.klt_forward_backward = true;
    else if (value == "false" || value == "0") cfg.klt_forward_backward = false;
    else throw ParseError("config key 'klt_forward_backward': expected true or false");
    return;
  }
  if (key == "klt_fb_threshold") return as_double(cfg.klt_fb_threshold);
  if (key == "split_min_points") return as_int(cfg.split_min_points);
  if (key == "suspension_max_frames") return as_int(cfg.suspension_max_frames);
  if (key == "iou_eval_threshold") return as_double(cfg.iou_eval_threshold);
  throw ParseError("unknown config key '" + key + "'");
}

/// Loads a config file over the defaults and validates the result.
inline TrackerConfig load_config(const std::filesystem::path& path) {
  TrackerConfig cfg;
  for (const auto& [k, v] : detail::read_key_values(path)) apply_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------------------------
// Frame directories

/// Image files of a frame directory keyed by the frame number parsed from their numeric stem.
struct FrameDirectory {
  std::map<std::int64_t, std::filesystem::path> color;  // .ppm
  std::map<std::int64_t, std::filesystem::path> gray;   // .pgm

  static FrameDirectory scan(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    FrameDirectory out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const auto stem = entry.path().stem().string();
      std::int64_t frame = 0;
      if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
          !detail::parse_number(stem, frame))
        continue;
      const auto ext = entry.path().extension().string();
      if (ext == ".ppm") out.color[frame] = entry.path();
      if (ext == ".pgm") out.gray[frame] = entry.path();
    }
    return out;
  }

  bool has(std::int64_t frame) const { return color.count(frame) || gray.count(frame); }

  void load_into(FrameData& data) const {
    if (const auto it = color.find(data.frame_index); it != color.end()) {
      data.color = read_ppm(it->second);
    } else if (const auto git = gray.find(data.frame_index); git != gray.end()) {
      data.gray = read_pgm(git->second);
    }
  }
};

inline std::string frame_filename(std::int64_t frame, const char* ext) {
  std::string digits = std::to_string(frame);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return digits + ext;
}

}  // namespace tracksel
