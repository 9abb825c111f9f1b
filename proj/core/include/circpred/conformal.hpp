#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "circpred/circular.hpp"
#include "circpred/error.hpp"
#include "circpred/forest.hpp"
#include "circpred/matrix.hpp"
#include "circpred/projection.hpp"

namespace circpred {

/// A circular prediction set: either the arc [center - ε, center + ε] with
/// 0 <= ε < π, or the whole circle. Arc endpoints are reported in [-π, 3π].
class PredictionSet {
 public:
  static PredictionSet arc(Angle center, double half_width);
  static PredictionSet full_circle() noexcept { return PredictionSet(); }

  bool is_full_circle() const noexcept { return full_; }
  Angle center() const noexcept { return center_; }
  /// ε for arcs, π for the full circle.
  double half_width() const noexcept { return full_ ? kPi : half_width_; }
  double lower() const noexcept { return full_ ? 0.0 : center_.radians() - half_width_; }
  double upper() const noexcept { return full_ ? kTwoPi : center_.radians() + half_width_; }

 private:
  PredictionSet() = default;
  bool full_ = true;
  Angle center_;
  double half_width_ = 0.0;
};

/// Arc of half-width ε around `center` when ε < π, otherwise the full circle.
PredictionSet build_prediction_set(Angle center, double epsilon);

/// True iff some 2πℓ-translate of y lies in the set.
bool covers(const PredictionSet& set, Angle y) noexcept;

/// 2ε for arcs, 2π for the full circle.
double arc_length(const PredictionSet& set) noexcept;

/// k = ⌈(1 - α)(n + 1)⌉. Throws ConfigError when α ∉ (0, 1) or k > n
/// ("insufficient calibration sample for this alpha").
std::size_t quantile_rank(std::size_t n, double alpha);

/// Angular residual scaled by the local variability, d(y, μ) / σ.
/// Throws DomainError if sigma <= 0.
double conformity_score(Angle y, Angle mu, double sigma);

struct CalibrationResult {
  std::vector<double> scores;
  std::size_t rank = 0;     // k
  double threshold = 0.0;   // k-th smallest score, ties included
  double alpha = 0.0;
};

/// k-th order statistic of `scores` for level α.
CalibrationResult calibrate_scores(std::vector<double> scores, double alpha);

/// Split-conformal calibration with arbitrary point and variability models:
/// `mu(x) -> Angle`, `sigma(x) -> double`.
template <class Mu, class Sigma>
CalibrationResult split_conformal_calibrate(const Mu& mu, const Sigma& sigma, const Matrix& x,
                                            std::span<const Angle> y, double alpha) {
  if (x.rows() != y.size()) throw ConfigError("calibration predictors and responses differ in length");
  quantile_rank(y.size(), alpha);  // fail before scoring
  std::vector<double> scores(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto xi = x.row(i);
    scores[i] = conformity_score(y[i], Angle(mu(xi)), sigma(xi));
  }
  return calibrate_scores(std::move(scores), alpha);
}

/// Variability predictions are clamped into [floor, π].
inline constexpr double kSigmaFloor = 1e-6;
double clamp_sigma(double sigma, double floor = kSigmaFloor) noexcept;

/// One training unit's out-of-bag bookkeeping.
struct ResidualRecord {
  bool has_oob = false;
  double residual = 0.0;  // δ_i ∈ [0, π]
  double sigma = 0.0;     // clamped OOB variability prediction
  double score = 0.0;     // r_i = δ_i / σ_i
};

struct OobConformalConfig {
  ForestParams forest;
  std::uint64_t seed = 1;
  AngleAveraging averaging = AngleAveraging::arithmetic;
  double sigma_floor = kSigmaFloor;
};

struct ConformalPrediction {
  Angle center;
  double sigma = 0.0;
  double epsilon = 0.0;
  PredictionSet set = PredictionSet::full_circle();
};

/// Out-of-bag conformal prediction with projected random forests: the point
/// forests fit (cos y, sin y), the variability forests fit (cos δ, sin δ) of
/// the out-of-bag circular residuals, all four on one bootstrap plan, and the
/// training scores r_i = δ_i / σ̂_oob(x_i) calibrate every future arc without
/// a separate calibration sample.
class OobConformalModel {
 public:
  static OobConformalModel fit(const Matrix& x, std::span<const Angle> y,
                               const OobConformalConfig& config);

  const ProjectedForest& point_model() const noexcept { return mu_; }
  const ProjectedForest& variability_model() const noexcept { return sigma_; }
  const std::vector<ResidualRecord>& records() const noexcept { return records_; }
  const OobConformalConfig& config() const noexcept { return config_; }

  /// Units with at least one out-of-bag tree (n').
  std::size_t scored_units() const noexcept { return scores_.size(); }
  std::size_t excluded_units() const noexcept { return records_.size() - scores_.size(); }
  /// Number of OOB σ̂ values raised to the floor during fitting.
  std::size_t clamped_sigmas() const noexcept { return clamped_; }

  /// r_(k) over the n' scored units, k = quantile_rank(n', α).
  CalibrationResult calibration(double alpha) const;
  double threshold(double alpha) const;

  Angle predict_center(std::span<const double> x) const;
  /// Full-bag variability prediction, clamped.
  double predict_sigma(std::span<const double> x) const;

  ConformalPrediction predict(std::span<const double> x, double alpha) const;
  ConformalPrediction predict_with_threshold(std::span<const double> x, double threshold) const;
  std::vector<ConformalPrediction> predict_batch(const Matrix& x, double alpha,
                                                 std::size_t threads = 0) const;

 private:
  ProjectedForest mu_;
  ProjectedForest sigma_;
  OobConformalConfig config_;
  std::vector<ResidualRecord> records_;
  std::vector<double> scores_;  // sorted ascending
  std::size_t clamped_ = 0;
};

/// One-shot form of the out-of-bag procedure for a single future point.
std::pair<Angle, PredictionSet> oob_conformal_predict(const Matrix& x, std::span<const Angle> y,
                                                      std::size_t trees, std::uint64_t seed,
                                                      double alpha,
                                                      std::span<const double> x_new,
                                                      ForestParams params = {});

/// Idealized out-of-bag scores over the exhaustive bootstrap of an extended
/// sample of n + 1 <= 6 units (the last row is the held-out pair). Every one
/// of the (n+1)^(n+1) rows, enumerated lexicographically, trains one tree
/// whose feature-sampling seed is a symmetric hash of the row's contents.
/// Returns |y_i - mean of out-of-bag tree predictions at x_i| for all n + 1
/// units. Linear response. Throws ConfigError for more than 6 units.
std::vector<double> idealized_oob_scores(const Matrix& x, std::span<const double> y,
                                         const ForestParams& stump);

/// Number of rows in the exhaustive bootstrap of `units` units.
std::size_t exhaustive_bootstrap_size(std::size_t units);

}  // namespace circpred
