// Command-line front end: track, evaluate, synth, inspect.
//
// Exit codes: 0 success, 1 I/O or data errors, 2 usage errors.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "tracksel/tracksel.hpp"

namespace fs = std::filesystem;

namespace {

int run_track(const std::string& detections, const std::string& frames, const std::string& tracks_file,
              const std::string& config, const std::string& out) {
  const tracksel::TrackerConfig cfg = config.empty() ? tracksel::TrackerConfig{} : tracksel::load_config(config);
  tracksel::MotionSource motion;
  if (!frames.empty()) motion.frames = tracksel::FrameDirectory::scan(frames);
  if (!tracks_file.empty()) motion.tracks = tracksel::parse_feature_tracks(tracks_file);
  const auto result = tracksel::track_sequence(tracksel::parse_detections(detections), motion, cfg);
  const auto rows = result.rows();
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  tracksel::write_tracks(rows, out);
  std::size_t noise = 0, corrected = 0;
  for (const auto& f : result.frames) {
    noise += f.noise.size();
    corrected += f.corrected.size();
  }
  std::printf("frames %zu  tracks %zu  rows %zu  corrected %zu  noise %zu\n", result.frames.size(),
              result.trajectories.size(), rows.size(), corrected, noise);
  return 0;
}

int run_evaluate(const std::string& gt_path, const std::string& hyp_path, double iou_thr) {
  const auto gt = tracksel::parse_track_boxes(gt_path);
  const auto hyp = tracksel::parse_track_boxes(hyp_path);
  const auto report = tracksel::evaluate(gt, hyp, iou_thr);
  const auto& c = report.clear;
  std::printf("%-8s %-8s %-8s %-8s %-8s %-8s %-6s %-6s %-6s\n", "MOTA", "MOTP", "M_bar", "MT(%)", "PT(%)", "ML(%)", "FP",
              "FN", "IDSW");
  std::printf("%-8.4f %-8.4f %-8.4f %-8.2f %-8.2f %-8.2f %-6zu %-6zu %-6zu\n", c.mota, c.motp, report.m_bar(),
              report.coverage.mt_percent(), report.coverage.pt_percent(), report.coverage.ml_percent(), c.fp, c.fn,
              c.idsw);
  return 0;
}

int run_synth(const std::string& spec_path, const std::string& out) {
  tracksel::generate_synthetic(tracksel::parse_synth_spec(spec_path), out);
  return 0;
}

int run_inspect(const std::string& frames, const std::string& tracks, const std::string& out) {
  const auto dir = tracksel::FrameDirectory::scan(frames);
  std::map<std::int64_t, std::vector<tracksel::TrackRow>> by_frame;
  for (const auto& r : tracksel::read_tracks(tracks)) by_frame[r.frame].push_back(r);
  fs::create_directories(out);
  std::set<std::int64_t> all;
  for (const auto& [f, _] : dir.color) all.insert(f);
  for (const auto& [f, _] : dir.gray) all.insert(f);
  for (const auto f : all) {
    tracksel::FrameData data;
    data.frame_index = f;
    dir.load_into(data);
    tracksel::ColorFrame img;
    if (data.color) {
      img = std::move(*data.color);
    } else {
      img = tracksel::ColorFrame(data.gray->width, data.gray->height);
      for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const auto v = static_cast<std::uint8_t>(std::clamp(std::lround(data.gray->pixels[i]), 0L, 255L));
        img.pixels[i] = {v, v, v};
      }
    }
    for (const auto& r : by_frame[f]) {
      const auto color = tracksel::id_color(r.id);
      tracksel::draw_rect(img, r.box, color);
      tracksel::draw_label(img, static_cast<int>(r.box.x) + 2, static_cast<int>(r.box.y) + 2, std::to_string(r.id),
                           color);
    }
    tracksel::write_ppm(fs::path(out) / tracksel::frame_filename(f, ".ppm"), img);
  }
  std::printf("wrote %zu overlay frames to %s\n", all.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tracking-by-detection with automatic tracker selection"};
  app.require_subcommand(1);

  std::string detections, frames, tracks_file, config, out;
  auto* track = app.add_subcommand("track", "Track detections through a sequence");
  track->add_option("--detections", detections, "Detection CSV (frame,id,x,y,w,h,conf)")->required();
  auto* frames_opt = track->add_option("--frames", frames, "Directory of NNNNNN.ppm / .pgm frames");
  auto* tracks_opt = track->add_option("--tracks-file", tracks_file, "Precomputed feature tracks");
  track->add_option("--config", config, "key = value configuration file");
  track->add_option("--out", out, "Output track CSV (a .tags.csv sidecar is written next to it)")->required();

  std::string gt, hyp;
  double iou_thr = 0.5;
  auto* evaluate = app.add_subcommand("evaluate", "CLEAR-MOT and MT/PT/ML scores");
  evaluate->add_option("--gt", gt, "Ground-truth CSV")->required();
  evaluate->add_option("--hyp", hyp, "Tracker output CSV")->required();
  evaluate->add_option("--iou", iou_thr, "IoU match threshold")->check(CLI::Range(1e-9, 1.0));

  std::string spec, synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence");
  synth->add_option("--spec", spec, "Synthetic sequence description")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  std::string inspect_frames, inspect_tracks, inspect_out;
  auto* inspect = app.add_subcommand("inspect", "Write per-frame PPM overlays of tracks");
  inspect->add_option("--frames", inspect_frames, "Frame directory")->required();
  inspect->add_option("--tracks", inspect_tracks, "Track CSV")->required();
  inspect->add_option("--out", inspect_out, "Overlay output directory")->required();

  try {
    app.parse(argc, argv);
    if (track->parsed() && frames_opt->count() == 0 && tracks_opt->count() == 0)
      throw CLI::ValidationError("track", "one of --frames or --tracks-file is required");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (track->parsed()) return run_track(detections, frames, tracks_file, config, out);
    if (evaluate->parsed()) return run_evaluate(gt, hyp, iou_thr);
    if (synth->parsed()) return run_synth(spec, synth_out);
    if (inspect->parsed()) return run_inspect(inspect_frames, inspect_tracks, inspect_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
