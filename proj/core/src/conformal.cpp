#include "circpred/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include <spdlog/spdlog.h>

#include "circpred/parallel.hpp"

namespace circpred {

PredictionSet PredictionSet::arc(Angle center, double half_width) {
  if (!(half_width >= 0.0) || !(half_width < kPi)) {
    throw DomainError("prediction arc half-width must lie in [0, pi)");
  }
  PredictionSet s;
  s.full_ = false;
  s.center_ = center;
  s.half_width_ = half_width;
  return s;
}

PredictionSet build_prediction_set(Angle center, double epsilon) {
  if (!(epsilon >= 0.0)) throw DomainError("prediction set radius must be nonnegative");
  if (epsilon < kPi) return PredictionSet::arc(center, epsilon);
  return PredictionSet::full_circle();
}

bool covers(const PredictionSet& set, Angle y) noexcept {
  if (set.is_full_circle()) return true;
  return angular_distance(y, set.center()) <= set.half_width();
}

double arc_length(const PredictionSet& set) noexcept {
  return set.is_full_circle() ? kTwoPi : 2.0 * set.half_width();
}

std::size_t quantile_rank(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("miscoverage level alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
  const double target = (1.0 - alpha) * static_cast<double>(n + 1);
  // Absorb representation error such as (1 - 0.1) * 100 = 90.00000000000001.
  const double below = std::floor(target);
  const double k = (target - below) <= 1e-9 * std::max(1.0, target) ? below : std::ceil(target);
  const auto rank = static_cast<std::size_t>(std::max(1.0, k));
  if (rank > n) {
    throw ConfigError("insufficient calibration sample for this alpha: need rank " +
                      std::to_string(rank) + " but only " + std::to_string(n) + " scores");
  }
  return rank;
}

double conformity_score(Angle y, Angle mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("conformity score needs sigma > 0");
  return angular_distance(y, mu) / sigma;
}

CalibrationResult calibrate_scores(std::vector<double> scores, double alpha) {
  CalibrationResult r;
  r.alpha = alpha;
  r.rank = quantile_rank(scores.size(), alpha);
  std::vector<double> sorted = scores;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(r.rank - 1),
                   sorted.end());
  r.threshold = sorted[r.rank - 1];
  r.scores = std::move(scores);
  return r;
}

double clamp_sigma(double sigma, double floor) noexcept {
  if (!(sigma >= floor)) return floor;  // also catches NaN
  return std::min(sigma, kPi);
}

// ---------------------------------------------------------------------------

OobConformalModel OobConformalModel::fit(const Matrix& x, std::span<const Angle> y,
                                         const OobConformalConfig& config) {
  if (x.rows() != y.size()) throw ConfigError("predictors and responses differ in length");
  if (y.empty()) throw ConfigError("out-of-bag conformal prediction needs training data");

  OobConformalModel m;
  m.config_ = config;
  const std::size_t n = y.size();
  const auto plan = std::make_shared<const BootstrapPlan>(
      BootstrapPlan::generate(n, config.forest.trees, config.seed));
  const FeatureOrder order(x);

  m.mu_ = train_projected(x, y, plan, config.forest, order);

  m.records_.assign(n, {});
  std::vector<double> res_cos(n);
  std::vector<double> res_sin(n);
  parallel_for(n, config.forest.threads, [&](std::size_t i) {
    const auto xi = x.row(i);
    auto& rec = m.records_[i];
    rec.has_oob = m.mu_.has_oob(i);
    // Units without out-of-bag trees still need a residual target for the
    // variability forests; they use the full-bag prediction and are never scored.
    const Angle fitted = rec.has_oob ? m.mu_.predict_angle_oob(i, xi, config.averaging)
                                     : m.mu_.predict_angle_fullbag(xi, config.averaging);
    rec.residual = angular_distance(y[i], fitted);
    res_cos[i] = std::cos(rec.residual);
    res_sin[i] = std::sin(rec.residual);
  });

  m.sigma_ = train_projected_components(x, res_cos, res_sin, plan, config.forest, order);

  std::vector<std::uint8_t> clamped(n, 0);
  parallel_for(n, config.forest.threads, [&](std::size_t i) {
    auto& rec = m.records_[i];
    if (!rec.has_oob) return;
    const double raw = m.sigma_.predict_angle_oob(i, x.row(i), config.averaging).radians();
    clamped[i] = raw < config.sigma_floor ? 1 : 0;
    rec.sigma = clamp_sigma(raw, config.sigma_floor);
    rec.score = rec.residual / rec.sigma;
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (m.records_[i].has_oob) m.scores_.push_back(m.records_[i].score);
    m.clamped_ += clamped[i];
  }
  std::sort(m.scores_.begin(), m.scores_.end());

  if (m.excluded_units() > 0) {
    spdlog::info("{} training units had no out-of-bag trees and were not scored",
                 m.excluded_units());
  }
  if (m.clamped_ > 0) {
    spdlog::warn("{} out-of-bag variability predictions were below {} and were clamped",
                 m.clamped_, config.sigma_floor);
  }
  return m;
}

CalibrationResult OobConformalModel::calibration(double alpha) const {
  CalibrationResult r;
  r.alpha = alpha;
  r.rank = quantile_rank(scores_.size(), alpha);
  r.threshold = scores_[r.rank - 1];
  r.scores = scores_;
  return r;
}

double OobConformalModel::threshold(double alpha) const {
  return scores_[quantile_rank(scores_.size(), alpha) - 1];
}

Angle OobConformalModel::predict_center(std::span<const double> x) const {
  return mu_.predict_angle_fullbag(x, config_.averaging);
}

double OobConformalModel::predict_sigma(std::span<const double> x) const {
  return clamp_sigma(sigma_.predict_angle_fullbag(x, config_.averaging).radians(),
                     config_.sigma_floor);
}

ConformalPrediction OobConformalModel::predict_with_threshold(std::span<const double> x,
                                                              double threshold) const {
  ConformalPrediction p;
  p.center = predict_center(x);
  p.sigma = predict_sigma(x);
  p.epsilon = threshold * p.sigma;
  p.set = build_prediction_set(p.center, p.epsilon);
  return p;
}

ConformalPrediction OobConformalModel::predict(std::span<const double> x, double alpha) const {
  return predict_with_threshold(x, threshold(alpha));
}

std::vector<ConformalPrediction> OobConformalModel::predict_batch(const Matrix& x, double alpha,
                                                                  std::size_t threads) const {
  const double thr = threshold(alpha);
  std::vector<ConformalPrediction> out(x.rows());
  parallel_for(x.rows(), threads,
               [&](std::size_t i) { out[i] = predict_with_threshold(x.row(i), thr); });
  return out;
}

std::pair<Angle, PredictionSet> oob_conformal_predict(const Matrix& x, std::span<const Angle> y,
                                                      std::size_t trees, std::uint64_t seed,
                                                      double alpha,
                                                      std::span<const double> x_new,
                                                      ForestParams params) {
  quantile_rank(y.size(), alpha);
  OobConformalConfig config;
  config.forest = params;
  config.forest.trees = trees;
  config.seed = seed;
  const auto model = OobConformalModel::fit(x, y, config);
  const auto p = model.predict(x_new, alpha);
  return {p.center, p.set};
}

}  // namespace circpred
