#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tracksel/models.hpp"

using tracksel::AppearanceModel;
using tracksel::DescriptorKind;
using tracksel::ObjectSnapshot;
using tracksel::TrackerKind;
using tracksel::TrackerProposal;

namespace {

ObjectSnapshot shape_snapshot(double w, double h) {
  ObjectSnapshot s;
  s.detection.bbox = {0, 0, w, h};
  s.descriptors = tracksel::extract_shape(s.detection.bbox);
  return s;
}

std::vector<double> spike(std::size_t at) {
  std::vector<double> h(16, 0.0);
  h[at] = 1.0;
  return h;
}

/// Snapshot with hand-made colour descriptors on a one-level pyramid.
ObjectSnapshot color_snapshot(std::size_t hist_bin, double cov_scale, std::array<double, 3> color) {
  ObjectSnapshot s = shape_snapshot(10, 20);
  s.descriptors.color_histogram = {{spike(hist_bin), spike(hist_bin), spike(hist_bin)}};
  s.descriptors.color_covariance = {cov_scale * Eigen::MatrixXd::Identity(2, 2)};
  s.descriptors.dominant_colors = {{{color, 1.0}}};
  return s;
}

TrackerProposal proposal(TrackerKind k, double joint, double evidence) {
  TrackerProposal p;
  p.tracker = k;
  p.trajectory = 4;
  p.joint_probability = joint;
  p.evidence = evidence;
  return p;
}

}  // namespace

TEST(ProbSize, GaussianPeakAndOneSigma) {
  // ratios 1 and 3: mean 2, population std 1
  const std::vector<ObjectSnapshot> window{shape_snapshot(10, 10), shape_snapshot(30, 10)};
  const AppearanceModel m(window, 20, 10);
  EXPECT_DOUBLE_EQ(m.mean(DescriptorKind::ShapeRatio), 2.0);
  EXPECT_DOUBLE_EQ(m.sigma(DescriptorKind::ShapeRatio), 1.0);
  EXPECT_DOUBLE_EQ(tracksel::prob_size(shape_snapshot(20, 10), m, DescriptorKind::ShapeRatio), 1.0);
  EXPECT_NEAR(tracksel::prob_size(shape_snapshot(30, 10), m, DescriptorKind::ShapeRatio), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(tracksel::prob_size(shape_snapshot(30, 10), m, DescriptorKind::ShapeRatio), 0.6065, 1e-4);
  EXPECT_THROW(tracksel::prob_size(shape_snapshot(1, 1), m, DescriptorKind::ColorHistogram), std::invalid_argument);
}

TEST(ProbSize, LengthFactor) {
  const std::vector<ObjectSnapshot> window{shape_snapshot(10, 10)};
  EXPECT_DOUBLE_EQ(tracksel::prob_size(shape_snapshot(10, 10), AppearanceModel(window, 5, 10), DescriptorKind::Area), 0.5);
  EXPECT_DOUBLE_EQ(AppearanceModel(window, 10, 10).length_factor(), 1.0);
  EXPECT_DOUBLE_EQ(AppearanceModel(window, 40, 10).length_factor(), 1.0);
  EXPECT_DOUBLE_EQ(AppearanceModel(window, 0, 10).length_factor(), 0.0);
}

TEST(ProbSize, SigmaFloorForConstantWindow) {
  const std::vector<ObjectSnapshot> window(4, shape_snapshot(10, 20));
  const AppearanceModel m(window, 10, 10);
  EXPECT_DOUBLE_EQ(m.sigma(DescriptorKind::Area), 0.05 * 200.0 + 1e-6);
  EXPECT_DOUBLE_EQ(m.sigma(DescriptorKind::ShapeRatio), 0.05 * 0.5 + 1e-6);
}

TEST(AppearanceModelWindow, KeepsLastQ) {
  std::vector<ObjectSnapshot> window;
  for (int i = 1; i <= 8; ++i) window.push_back(shape_snapshot(i, 1));
  const AppearanceModel m(window, 8, 3);
  EXPECT_EQ(m.size(), 3u);
  EXPECT_DOUBLE_EQ(m.mean(DescriptorKind::Area), 7.0);
  EXPECT_THROW(AppearanceModel(std::span<const ObjectSnapshot>{}, 1, 3), std::invalid_argument);
}

TEST(ProbHistogram, Examples) {
  const std::vector<ObjectSnapshot> window{color_snapshot(0, 1, {0, 0, 0})};
  const AppearanceModel m(window, 10, 10);
  EXPECT_DOUBLE_EQ(tracksel::prob_histogram(color_snapshot(0, 1, {0, 0, 0}), m), 1.0);
  EXPECT_NEAR(tracksel::prob_histogram(color_snapshot(3, 1, {0, 0, 0}), m), 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(tracksel::prob_histogram(color_snapshot(15, 1, {0, 0, 0}), m), 0.0);
}

TEST(ProbCovariance, Examples) {
  const std::vector<ObjectSnapshot> window{color_snapshot(0, 1, {0, 0, 0})};
  EXPECT_NEAR(tracksel::prob_covariance(color_snapshot(0, 4, {0, 0, 0}), AppearanceModel(window, 10, 10)),
              1.0 / (1.0 + std::sqrt(2.0) * std::log(4.0)), 1e-12);
  EXPECT_NEAR(tracksel::prob_covariance(color_snapshot(0, 4, {0, 0, 0}), AppearanceModel(window, 5, 10)),
              0.5 / (1.0 + std::sqrt(2.0) * std::log(4.0)), 1e-12);
  EXPECT_NEAR(tracksel::prob_covariance(color_snapshot(0, 1, {0, 0, 0}), AppearanceModel(window, 10, 10)), 1.0,
              1e-12);
}

TEST(LogEuclideanMean, IdempotentAndCommutingCase) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Eigen::MatrixXd a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = n(rng);
  const Eigen::MatrixXd c = a * a.transpose() + Eigen::MatrixXd::Identity(4, 4);
  const std::vector<Eigen::MatrixXd> same{c, c};
  EXPECT_TRUE(tracksel::log_euclidean_mean(same).isApprox(c, 1e-10));
  // diagonal matrices: element-wise geometric mean
  const std::vector<Eigen::MatrixXd> diag{Eigen::Vector2d(1, 4).asDiagonal(), Eigen::Vector2d(4, 9).asDiagonal()};
  const Eigen::MatrixXd expected = Eigen::Vector2d(2, 6).asDiagonal();
  EXPECT_TRUE(tracksel::log_euclidean_mean(diag).isApprox(expected, 1e-12));
}

TEST(ProbDominantColor, WindowMean) {
  const auto black = color_snapshot(0, 1, {0, 0, 0});
  const auto white = color_snapshot(0, 1, {255, 255, 255});
  const std::vector<ObjectSnapshot> alternating{black, white, black, white};
  EXPECT_NEAR(tracksel::prob_dominant_color(black, AppearanceModel(alternating, 10, 10)), 0.5, 1e-12);
  EXPECT_NEAR(tracksel::prob_dominant_color(black, AppearanceModel(alternating, 2, 4)), 0.25, 1e-12);
  const std::vector<ObjectSnapshot> constant(3, black);
  EXPECT_DOUBLE_EQ(tracksel::prob_dominant_color(black, AppearanceModel(constant, 10, 10)), 1.0);
}

TEST(JointProbability, ProductOfComponents) {
  tracksel::ModelScores s;
  s.length_factor = 1.0;
  s.likelihood = {1, 1, 0.8, 0.5, 1};
  EXPECT_NEAR(s.joint(), 0.4, 1e-15);
  s.likelihood = {1, 1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(s.joint(), 1.0);
  s.likelihood = {1, 0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(s.joint(), 0.0);
  s.likelihood = {1, 1, 1, 1, 1};
  s.length_factor = 0.5;
  EXPECT_DOUBLE_EQ(s.joint(), 1.0 / 32);
  EXPECT_DOUBLE_EQ(s.evidence(), 1.0);
}

TEST(JointProbability, MatchesComponentScores) {
  const std::vector<ObjectSnapshot> window{color_snapshot(0, 1, {0, 0, 0}), color_snapshot(1, 2, {20, 0, 0})};
  const AppearanceModel m(window, 6, 10);
  const auto c = color_snapshot(2, 3, {40, 10, 0});
  const double product = tracksel::prob_size(c, m, DescriptorKind::ShapeRatio) *
                         tracksel::prob_size(c, m, DescriptorKind::Area) * tracksel::prob_histogram(c, m) *
                         tracksel::prob_covariance(c, m) * tracksel::prob_dominant_color(c, m);
  EXPECT_NEAR(tracksel::joint_probability(c, m), product, 1e-15);
}

TEST(JointProbability, GeometryOnlyCandidateUsesNeutralColorFactors) {
  const std::vector<ObjectSnapshot> window{shape_snapshot(10, 20)};
  const auto s = tracksel::model_scores(shape_snapshot(10, 20), AppearanceModel(window, 10, 10));
  for (double v : s.likelihood) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(BestCandidate, ArgmaxWithLowestIndexOnTies) {
  const std::vector<ObjectSnapshot> window{shape_snapshot(10, 20)};
  const AppearanceModel m(window, 10, 10);
  const std::vector<ObjectSnapshot> one{shape_snapshot(50, 5)};
  EXPECT_EQ(tracksel::best_candidate(m, one), 0u);
  const std::vector<ObjectSnapshot> two{shape_snapshot(10, 20), shape_snapshot(11, 20)};
  EXPECT_EQ(tracksel::best_candidate(m, two), 0u);
  const std::vector<ObjectSnapshot> reversed{shape_snapshot(11, 20), shape_snapshot(10, 20)};
  EXPECT_EQ(tracksel::best_candidate(m, reversed), 1u);
  const std::vector<ObjectSnapshot> tie{shape_snapshot(10, 20), shape_snapshot(10, 20)};
  EXPECT_EQ(tracksel::best_candidate(m, tie), 0u);
  EXPECT_THROW(tracksel::best_candidate(m, {}), std::invalid_argument);
}

TEST(SelectTracker, Rules) {
  const auto a6 = proposal(TrackerKind::Appearance, 0.6, 0.6);
  const auto k3 = proposal(TrackerKind::Klt, 0.3, 0.3);
  const auto k6 = proposal(TrackerKind::Klt, 0.6, 0.6);
  EXPECT_EQ(tracksel::select_tracker(std::nullopt, k3, 0.05)->tracker, TrackerKind::Klt);
  EXPECT_EQ(tracksel::select_tracker(a6, k3, 0.05)->tracker, TrackerKind::Appearance);
  EXPECT_EQ(tracksel::select_tracker(a6, k6, 0.05)->tracker, TrackerKind::Appearance);
  EXPECT_EQ(tracksel::select_tracker(proposal(TrackerKind::Appearance, 0.2, 0.2), k3, 0.05)->tracker,
            TrackerKind::Klt);
  EXPECT_FALSE(tracksel::select_tracker(std::nullopt, std::nullopt, 0.05));
  EXPECT_FALSE(tracksel::select_tracker(proposal(TrackerKind::Appearance, 0.01, 0.01), std::nullopt, 0.05));
}

TEST(SelectTracker, OrderOfProposalsDoesNotMatter) {
  const std::vector<TrackerProposal> ak{proposal(TrackerKind::Appearance, 0.4, 0.4), proposal(TrackerKind::Klt, 0.5, 0.5)};
  const std::vector<TrackerProposal> ka{ak[1], ak[0]};
  EXPECT_EQ(tracksel::select_tracker(ak, 0.05)->tracker, TrackerKind::Klt);
  EXPECT_EQ(tracksel::select_tracker(ka, 0.05)->tracker, TrackerKind::Klt);
}

TEST(NoiseFilter, OnlyUnmatchedSplitObjects) {
  ObjectSnapshot split = shape_snapshot(5, 5);
  split.detection.source = tracksel::SnapshotSource::SplitCorrection;
  EXPECT_FALSE(tracksel::is_noise(split, true));
  EXPECT_TRUE(tracksel::is_noise(split, false));
  EXPECT_FALSE(tracksel::is_noise(shape_snapshot(5, 5), false));
}
