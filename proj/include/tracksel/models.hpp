#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tracksel/core.hpp"
#include "tracksel/descriptors.hpp"
#include "tracksel/klt.hpp"
#include "tracksel/similarity.hpp"

namespace tracksel {

/// Log-Euclidean mean exp(mean(log C)) of symmetric positive-definite matrices.
inline Eigen::MatrixXd log_euclidean_mean(std::span<const Eigen::MatrixXd> mats) {
  if (mats.empty()) throw std::invalid_argument("log_euclidean_mean of nothing");
  const Eigen::Index d = mats.front().rows();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (const auto& m : mats) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
      throw NotPositiveDefinite("log_euclidean_mean: matrix is not positive definite");
    acc += es.eigenvectors() * es.eigenvalues().array().log().matrix().asDiagonal() * es.eigenvectors().transpose();
  }
  acc /= double(mats.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (acc + acc.transpose()));
  Eigen::MatrixXd mean = es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
                         es.eigenvectors().transpose();
  return 0.5 * (mean + mean.transpose());
}

/// Appearance model of a trajectory over its last Q snapshots.
class AppearanceModel {
 public:
  AppearanceModel(std::span<const ObjectSnapshot> window, std::int64_t trajectory_length, int q)
      : window_(window.begin(), window.end()), length_(trajectory_length), q_(q) {
    if (window_.empty()) throw std::invalid_argument("appearance model needs at least one snapshot");
    if (q <= 0) throw std::invalid_argument("model window must be positive");
    if (static_cast<int>(window_.size()) > q) window_.erase(window_.begin(), window_.end() - q);
    refresh();
  }

  std::size_t size() const { return window_.size(); }
  std::int64_t trajectory_length() const { return length_; }
  int q() const { return q_; }
  const std::vector<ObjectSnapshot>& window() const { return window_; }

  double mean(DescriptorKind k) const { return k == DescriptorKind::ShapeRatio ? ratio_mean_ : area_mean_; }
  double sigma(DescriptorKind k) const { return k == DescriptorKind::ShapeRatio ? ratio_sigma_ : area_sigma_; }

  bool has_color() const { return has_color_; }
  const CellHistogram& mean_histogram() const { return mean_hist_; }
  const Eigen::MatrixXd& mean_covariance() const { return mean_cov_; }

  /// min(|trajectory| / Q, 1)
  double length_factor() const { return std::clamp(double(length_) / double(q_), 0.0, 1.0); }

 private:
  void refresh() {
    auto stats = [&](auto get, double& mu, double& sigma) {
      mu = 0.0;
      for (const auto& s : window_) mu += get(s);
      mu /= double(window_.size());
      double var = 0.0;
      for (const auto& s : window_) var += (get(s) - mu) * (get(s) - mu);
      var /= double(window_.size());
      sigma = std::max(std::sqrt(var), 0.05 * mu + 1e-6);
    };
    stats([](const ObjectSnapshot& s) { return s.descriptors.shape_ratio; }, ratio_mean_, ratio_sigma_);
    stats([](const ObjectSnapshot& s) { return s.descriptors.area; }, area_mean_, area_sigma_);

    has_color_ = std::all_of(window_.begin(), window_.end(),
                             [](const ObjectSnapshot& s) { return s.descriptors.has_color(); });
    if (!has_color_) return;
    const std::size_t bins = window_.front().descriptors.color_histogram.front()[0].size();
    for (auto& ch : mean_hist_) ch.assign(bins, 0.0);
    std::vector<Eigen::MatrixXd> covs;
    for (const auto& s : window_) {
      const auto& h = s.descriptors.color_histogram.front();
      for (int c = 0; c < 3; ++c) {
        if (h[c].size() != bins) throw std::invalid_argument("appearance model: histogram sizes differ");
        for (std::size_t b = 0; b < bins; ++b) mean_hist_[c][b] += h[c][b] / double(window_.size());
      }
      covs.push_back(s.descriptors.color_covariance.front());
    }
    mean_cov_ = log_euclidean_mean(covs);
  }

  std::vector<ObjectSnapshot> window_;
  std::int64_t length_ = 0;
  int q_ = 1;
  double ratio_mean_ = 0, ratio_sigma_ = 0, area_mean_ = 0, area_sigma_ = 0;
  bool has_color_ = false;
  CellHistogram mean_hist_;
  Eigen::MatrixXd mean_cov_;
};

namespace detail {

inline double size_likelihood(double s, double mu, double sigma) {
  const double z = (s - mu) / sigma;
  return std::exp(-0.5 * z * z);
}

inline double histogram_likelihood(const DescriptorSet& c, const AppearanceModel& m) {
  return cell_histogram_similarity(c.color_histogram.front(), m.mean_histogram());
}

inline double covariance_likelihood(const DescriptorSet& c, const AppearanceModel& m) {
  return covariance_similarity(c.color_covariance.front(), m.mean_covariance());
}

inline double dominant_color_likelihood(const DescriptorSet& c, const AppearanceModel& m) {
  double sum = 0.0;
  for (const auto& s : m.window()) sum += ds_dominant_color(c, s.descriptors);
  return sum / double(m.size());
}

}  // namespace detail

/// Peak-normalised Gaussian score of shape ratio (k = ShapeRatio) or area (k = Area), scaled by the
/// trajectory length factor.
inline double prob_size(const ObjectSnapshot& candidate, const AppearanceModel& m, DescriptorKind k) {
  if (k != DescriptorKind::ShapeRatio && k != DescriptorKind::Area)
    throw std::invalid_argument("prob_size applies to shape ratio and area only");
  const double s = k == DescriptorKind::ShapeRatio ? candidate.descriptors.shape_ratio : candidate.descriptors.area;
  return detail::size_likelihood(s, m.mean(k), m.sigma(k)) * m.length_factor();
}

inline double prob_histogram(const ObjectSnapshot& candidate, const AppearanceModel& m) {
  if (!candidate.descriptors.has_color() || !m.has_color()) return m.length_factor();
  return detail::histogram_likelihood(candidate.descriptors, m) * m.length_factor();
}

inline double prob_covariance(const ObjectSnapshot& candidate, const AppearanceModel& m) {
  if (!candidate.descriptors.has_color() || !m.has_color()) return m.length_factor();
  return detail::covariance_likelihood(candidate.descriptors, m) * m.length_factor();
}

inline double prob_dominant_color(const ObjectSnapshot& candidate, const AppearanceModel& m) {
  if (!candidate.descriptors.has_color() || !m.has_color()) return m.length_factor();
  return detail::dominant_color_likelihood(candidate.descriptors, m) * m.length_factor();
}

/// The five per-descriptor model scores of a candidate.
struct ModelScores {
  std::array<double, kDescriptorCount> likelihood{};  // without the length factor
  double length_factor = 0.0;

  /// Product of the five length-scaled scores.
  double joint() const {
    double p = 1.0;
    for (double v : likelihood) p *= v * length_factor;
    return p;
  }
  /// Product of the five scores before length scaling.
  double evidence() const {
    double p = 1.0;
    for (double v : likelihood) p *= v;
    return p;
  }
};

inline ModelScores model_scores(const ObjectSnapshot& candidate, const AppearanceModel& m) {
  ModelScores s;
  s.length_factor = m.length_factor();
  const auto& d = candidate.descriptors;
  s.likelihood[0] = detail::size_likelihood(d.shape_ratio, m.mean(DescriptorKind::ShapeRatio),
                                            m.sigma(DescriptorKind::ShapeRatio));
  s.likelihood[1] = detail::size_likelihood(d.area, m.mean(DescriptorKind::Area), m.sigma(DescriptorKind::Area));
  if (d.has_color() && m.has_color()) {
    s.likelihood[2] = detail::histogram_likelihood(d, m);
    s.likelihood[3] = detail::covariance_likelihood(d, m);
    s.likelihood[4] = detail::dominant_color_likelihood(d, m);
  } else {
    s.likelihood[2] = s.likelihood[3] = s.likelihood[4] = 1.0;
  }
  return s;
}

inline double joint_probability(const ObjectSnapshot& candidate, const AppearanceModel& m) {
  return model_scores(candidate, m).joint();
}

/// Index of the candidate with the highest joint probability; the lowest index wins ties.
inline std::size_t best_candidate(const AppearanceModel& m, std::span<const ObjectSnapshot> candidates) {
  if (candidates.empty()) throw std::invalid_argument("best_candidate: no candidates");
  std::size_t best = 0;
  double best_p = joint_probability(candidates[0], m);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double p = joint_probability(candidates[i], m);
    if (p > best_p) {
      best_p = p;
      best = i;
    }
  }
  return best;
}

enum class TrackerKind { Appearance, Klt };

struct TrackerProposal {
  TrackerKind tracker = TrackerKind::Appearance;
  TrackId trajectory = kUnlabeled;
  std::size_t detection = 0;
  double joint_probability = 0.0;
  /// Joint score with the trajectory-length factors divided out; compared against the acceptance gate.
  double evidence = 0.0;
};

/// Picks the proposal whose candidate has the higher joint probability under the trajectory's
/// model. Proposals whose evidence is below `accept_threshold` are ignored; ties go to the
/// appearance tracker.
inline std::optional<TrackerProposal> select_tracker(const std::optional<TrackerProposal>& appearance,
                                                     const std::optional<TrackerProposal>& klt,
                                                     double accept_threshold) {
  auto admissible = [&](const std::optional<TrackerProposal>& p) {
    return p && std::isfinite(p->joint_probability) && p->evidence >= accept_threshold;
  };
  const bool a_ok = admissible(appearance);
  const bool k_ok = admissible(klt);
  if (a_ok && k_ok) return klt->joint_probability > appearance->joint_probability ? klt : appearance;
  if (a_ok) return appearance;
  if (k_ok) return klt;
  return std::nullopt;
}

/// Order-free form: proposals may arrive in any order, at most one per tracker.
inline std::optional<TrackerProposal> select_tracker(std::span<const TrackerProposal> proposals,
                                                     double accept_threshold) {
  std::optional<TrackerProposal> appearance, klt;
  for (const auto& p : proposals) (p.tracker == TrackerKind::Appearance ? appearance : klt) = p;
  return select_tracker(appearance, klt, accept_threshold);
}

/// Split-correction objects that no trajectory selected are noise. Detector output never is.
inline bool is_noise(const ObjectSnapshot& obj, bool matched) {
  return obj.source() == SnapshotSource::SplitCorrection && !matched;
}

}  // namespace tracksel
