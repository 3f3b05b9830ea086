#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scenarios.hpp"

namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("tracksel_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) const {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

struct CommandResult {
  int code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string(TRACKSEL_CLI_PATH) + " " + args + " 2>&1";
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[512];
  while (fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

tracksel::SynthSpec small_spec() {
  tracksel::SynthSpec spec;
  spec.width = 160;
  spec.height = 100;
  spec.frames = 12;
  spec.objects = {scenario::object(10, 20, 3, 0, 20, 50, {210, 40, 40}, 3),
                  scenario::object(120, 30, -2, 0, 22, 46, {30, 60, 220}, 4)};
  return spec;
}

}  // namespace

using Io = TempDir;
using Cli = TempDir;

TEST_F(Io, ParsesDetectionLine) {
  const auto dets = tracksel::parse_detections(write("d.csv", "1,-1,10,20,30,80,0.9\n"));
  ASSERT_EQ(dets.size(), 1u);
  const auto& d = dets.at(1).at(0);
  EXPECT_EQ(d.bbox, (tracksel::BoundingBox{10, 20, 30, 80}));
  EXPECT_DOUBLE_EQ(d.confidence, 0.9);
}

TEST_F(Io, HeaderCommentsAndEmptyFile) {
  EXPECT_TRUE(tracksel::parse_detections(write("e.csv", "")).empty());
  const auto rows = tracksel::parse_mot_csv(write("h.csv", "frame,id,x,y,w,h,conf\n# note\n\n2,4,1,1,2,2\n"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].id, 4);
  EXPECT_DOUBLE_EQ(rows[0].confidence, 1.0);
}

TEST_F(Io, ReportsBadLines) {
  try {
    tracksel::parse_mot_csv(write("bad.csv", "1,-1,10,20,-5,80,1\n"));
    FAIL() << "expected a parse error";
  } catch (const tracksel::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("non-positive size, line 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(tracksel::parse_mot_csv(write("short.csv", "1,2,3\n")), tracksel::ParseError);
  EXPECT_THROW(tracksel::parse_mot_csv(write("nan.csv", "1,2,x,4,5,6\n")), tracksel::ParseError);
  EXPECT_THROW(tracksel::parse_mot_csv(dir_ / "missing.csv"), tracksel::IoError);
}

TEST_F(Io, TrackRoundTripIsExact) {
  std::vector<tracksel::TrackRow> rows{{2, 1, {0.1, 1.0 / 3.0, 20.25, 50}, 0.7, tracksel::LinkTag::Klt},
                                       {1, 0, {3, 4, 5, 6}, 1.0, tracksel::LinkTag::New},
                                       {2, 0, {3.5, 4, 5, 6e-3}, 1.0, tracksel::LinkTag::Appearance}};
  const auto path = dir_ / "out.csv";
  tracksel::write_tracks(rows, path);
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return std::tie(a.frame, a.id) < std::tie(b.frame, b.id); });
  EXPECT_EQ(tracksel::read_tracks(path), rows);
  EXPECT_EQ(slurp(dir_ / "out.tags.csv"), "frame,id,tracker\n1,0,new\n2,0,A\n2,1,K\n");
}

TEST_F(Io, EmptyTrackSetWritesHeaders) {
  tracksel::write_tracks({}, dir_ / "t.csv");
  EXPECT_EQ(slurp(dir_ / "t.csv"), "frame,id,x,y,w,h,conf\n");
  EXPECT_EQ(slurp(dir_ / "t.tags.csv"), "frame,id,tracker\n");
}

TEST_F(Io, FeatureTrackRoundTrip) {
  const std::vector<tracksel::FeatureTrack> t{{3, 1.25, 2.5, 1.75, 2.0, tracksel::kUnlabeled},
                                              {4, 0.1, 0.2, 0.30000000000000004, 9, tracksel::kUnlabeled}};
  tracksel::write_feature_tracks(dir_ / "f.txt", t);
  EXPECT_EQ(tracksel::parse_feature_tracks(dir_ / "f.txt"), t);
  EXPECT_THROW(tracksel::parse_feature_tracks(write("g.txt", "1,2,3\n")), tracksel::ParseError);
}

TEST_F(Io, ConfigFile) {
  const auto cfg = tracksel::load_config(
      write("c.cfg", "# tuning\nlink_threshold_theta = 0.4\nmodel_window_Q = 6\nhomography = 1 0 0 0 1 0 0 0 1\n"));
  EXPECT_DOUBLE_EQ(cfg.link_threshold_theta, 0.4);
  EXPECT_EQ(cfg.model_window_Q, 6);
  ASSERT_TRUE(cfg.homography);
  EXPECT_DOUBLE_EQ((*cfg.homography)[8], 1.0);
  EXPECT_THROW(tracksel::load_config(write("u.cfg", "no_such_key = 1\n")), tracksel::ParseError);
  EXPECT_THROW(tracksel::load_config(write("v.cfg", "model_window_Q = 0\n")), std::invalid_argument);
}

TEST_F(Io, ImageRoundTrip) {
  const auto img = tracksel::render_frame(small_spec(), 3);
  tracksel::write_ppm(dir_ / "a.ppm", img);
  const auto back = tracksel::read_ppm(dir_ / "a.ppm");
  EXPECT_EQ(back.width, img.width);
  EXPECT_EQ(back.pixels, img.pixels);
  EXPECT_THROW(tracksel::read_ppm(write("b.ppm", "P5\n1 1\n255\nx")), tracksel::ImageIoError);
}

TEST_F(Io, SynthNoNoiseDetectionsEqualGroundTruth) {
  const auto spec = small_spec();
  const auto gt = tracksel::synth_ground_truth(spec);
  const auto det = tracksel::synth_detections(spec);
  ASSERT_EQ(gt.size(), det.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    EXPECT_EQ(gt[i].frame, det[i].frame);
    EXPECT_EQ(gt[i].box, det[i].box);
    EXPECT_EQ(det[i].id, -1);
  }
}

TEST_F(Io, SynthMergeEmitsUnionBox) {
  auto spec = small_spec();
  spec.merges = {{0, 1, 4, 6}};
  const auto det = tracksel::synth_detections(spec);
  for (std::int64_t f = 1; f <= spec.frames; ++f) {
    std::vector<tracksel::BoundingBox> boxes;
    for (const auto& r : det)
      if (r.frame == f) boxes.push_back(r.box);
    if (f >= 4 && f <= 6) {
      ASSERT_EQ(boxes.size(), 1u);
      const auto a = tracksel::object_box(spec.objects[0], f), b = tracksel::object_box(spec.objects[1], f);
      EXPECT_DOUBLE_EQ(boxes[0].x, std::min(a.x, b.x));
      EXPECT_DOUBLE_EQ(boxes[0].right(), std::max(a.right(), b.right()));
      EXPECT_DOUBLE_EQ(boxes[0].bottom(), std::max(a.bottom(), b.bottom()));
    } else {
      EXPECT_EQ(boxes.size(), 2u);
    }
  }
}

TEST_F(Io, SynthIsDeterministic) {
  auto spec = small_spec();
  spec.jitter = 1.5;
  spec.miss_rate = 0.1;
  spec.frames = 4;
  tracksel::generate_synthetic(spec, dir_ / "a");
  tracksel::generate_synthetic(spec, dir_ / "b");
  for (const char* f : {"det.csv", "gt.csv", "frames/000001.ppm", "frames/000004.ppm"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
}

TEST_F(Io, SynthSensorNoise) {
  auto spec = small_spec();
  spec.pixel_noise = 0.0;
  const auto clean = tracksel::render_frame(spec, 1);
  EXPECT_EQ(clean.at(spec.width - 1, spec.height - 1), spec.background);
  spec.pixel_noise = 3.0;
  const auto a = tracksel::render_frame(spec, 1), b = tracksel::render_frame(spec, 1);
  const auto c = tracksel::render_frame(spec, 2);
  std::size_t changed = 0, differs = 0;
  double sum = 0;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      EXPECT_EQ(a.at(x, y), b.at(x, y));
      for (int ch = 0; ch < 3; ++ch) {
        changed += a.at(x, y)[ch] != clean.at(x, y)[ch];
        sum += double(a.at(x, y)[ch]) - double(clean.at(x, y)[ch]);
      }
      differs += !(a.at(x, y) == c.at(x, y));
    }
  const double n = 3.0 * spec.width * spec.height;
  EXPECT_GT(double(changed) / n, 0.5);
  EXPECT_NEAR(sum / n, 0.0, 0.2);
  EXPECT_GT(differs, 0u);
  EXPECT_EQ(tracksel::parse_synth_spec(write("n.txt", "pixel_noise = 1.5\n")).pixel_noise, 1.5);
}

TEST_F(Io, SynthSpecFile) {
  const auto spec = tracksel::parse_synth_spec(
      write("s.txt", "width = 100\nheight = 80\nframes = 5\nseed = 9\nobject = 5 5 1 0 10 20 255 0 0 7\n"
                     "object = 60 5 -1 0 10 20 0 0 255 8 2 4\nmerge = 0 1 3 3\n"));
  EXPECT_EQ(spec.width, 100);
  ASSERT_EQ(spec.objects.size(), 2u);
  EXPECT_EQ(spec.objects[1].first_frame, 2);
  EXPECT_EQ(spec.objects[1].last_frame, 4);
  EXPECT_EQ(spec.merges.size(), 1u);
  EXPECT_THROW(tracksel::parse_synth_spec(write("bad.txt", "colour = 1\n")), tracksel::ParseError);
}

TEST_F(Io, FrameDirectoryScan) {
  fs::create_directories(dir_ / "frames");
  tracksel::write_ppm(dir_ / "frames" / "000002.ppm", tracksel::ColorFrame(4, 4));
  tracksel::write_pgm(dir_ / "frames" / "000003.pgm", tracksel::GrayFrame(4, 4));
  std::ofstream(dir_ / "frames" / "notes.txt") << "x";
  const auto d = tracksel::FrameDirectory::scan(dir_ / "frames");
  EXPECT_TRUE(d.has(2));
  EXPECT_TRUE(d.has(3));
  EXPECT_FALSE(d.has(1));
  tracksel::FrameData data;
  data.frame_index = 3;
  d.load_into(data);
  EXPECT_TRUE(data.gray.has_value());
  EXPECT_FALSE(data.color.has_value());
}

TEST_F(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run_cli("evaluate --bogus").code, 2);
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("--help").code, 0);
}

TEST_F(Cli, EvaluateIdenticalFiles) {
  const auto gt = write("gt.csv", "frame,id,x,y,w,h,conf\n1,0,0,0,10,10,1\n2,0,1,0,10,10,1\n2,1,40,0,10,10,1\n");
  const auto r = run_cli("evaluate --gt " + gt.string() + " --hyp " + gt.string());
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("MOTA"), std::string::npos);
  EXPECT_NE(r.output.find("1.0000"), std::string::npos) << r.output;
}

TEST_F(Cli, MissingInputIsDataError) {
  const auto r = run_cli("evaluate --gt " + (dir_ / "nope.csv").string() + " --hyp " + (dir_ / "nope.csv").string());
  EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, TrackNeedsMotionSource) {
  const auto d = write("d.csv", "1,-1,0,0,5,5,1\n");
  EXPECT_EQ(run_cli("track --detections " + d.string() + " --out " + (dir_ / "o.csv").string()).code, 2);
}

TEST_F(Cli, SynthTrackEvaluateEndToEnd) {
  const auto spec_file = write("spec.txt",
                               "width = 160\nheight = 100\nframes = 15\nobject = 10 20 3 0 20 50 210 40 40 3\n"
                               "object = 120 30 -2 0 22 46 30 60 220 4\n");
  const auto seq = dir_ / "seq";
  ASSERT_EQ(run_cli("synth --spec " + spec_file.string() + " --out " + seq.string()).code, 0);
  const auto out = dir_ / "tracks.csv";
  const auto t = run_cli("track --detections " + (seq / "det.csv").string() + " --frames " + (seq / "frames").string() +
                         " --out " + out.string());
  ASSERT_EQ(t.code, 0) << t.output;
  EXPECT_TRUE(fs::exists(dir_ / "tracks.tags.csv"));
  const auto gt = tracksel::parse_track_boxes(seq / "gt.csv");
  const auto hyp = tracksel::parse_track_boxes(out);
  EXPECT_DOUBLE_EQ(tracksel::clear_mot(gt, hyp).mota, 1.0);
  const auto e = run_cli("evaluate --gt " + (seq / "gt.csv").string() + " --hyp " + out.string());
  EXPECT_EQ(e.code, 0);
  EXPECT_NE(e.output.find("1.0000"), std::string::npos) << e.output;

  const auto overlay = dir_ / "overlay";
  ASSERT_EQ(run_cli("inspect --frames " + (seq / "frames").string() + " --tracks " + out.string() + " --out " +
                    overlay.string())
                .code,
            0);
  EXPECT_TRUE(fs::exists(overlay / "000015.ppm"));
}
