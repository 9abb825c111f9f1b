#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "circpred/circular.hpp"
#include "circpred/conformal.hpp"
#include "circpred/forest.hpp"
#include "circpred/matrix.hpp"

namespace circpred {

/// Projected normal regression with identity covariance: the response is the
/// direction of N(γ(x), I), γ(x) = (β_cᵀx̃, β_sᵀx̃), x̃ = (1, x).
struct ProjectedNormalModel {
  std::vector<double> beta_cos;  // intercept first
  std::vector<double> beta_sin;

  std::size_t features() const noexcept { return beta_cos.empty() ? 0 : beta_cos.size() - 1; }
  /// Mean vector γ(x).
  std::pair<double, double> mean_vector(std::span<const double> x) const;
  Angle predict(std::span<const double> x) const;
};

/// log of the projected normal angular density with mean vector γ = (g1, g2):
///   f(y) = (1/2π) · exp(-|γ|²/2) · [1 + t Φ(t)/φ(t)],  t = γᵀ(cos y, sin y).
double pn_log_density(Angle y, double g1, double g2);

double pn_log_likelihood(const ProjectedNormalModel& m, const Matrix& x,
                         std::span<const Angle> y);

/// atan_project of the mean vector at x; a (0, 0) mean is nudged as in
/// project_components.
Angle pn_predict(const ProjectedNormalModel& m, std::span<const double> x);

struct PnFitOptions {
  std::size_t max_iterations = 500;
  /// Stop when the mean log-likelihood improves by less than this over an iteration.
  double tolerance = 1e-8;
  /// Central-difference step.
  double step = 1e-5;
};

struct PnFitResult {
  ProjectedNormalModel model;
  double initial_log_likelihood = 0.0;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Maximum likelihood by BFGS with central finite-difference gradients,
/// started from least-squares fits of cos(y) and sin(y) on x̃. Deterministic.
/// Requires n > 2(d + 1). On non-convergence the best iterate is returned with
/// converged == false and a warning is logged.
PnFitResult fit_projected_normal(const Matrix& x, std::span<const Angle> y,
                                 const PnFitOptions& options = {});

/// Split-conformal wrapper: projected normal point model plus a regression
/// forest on the circular training residuals as the variability model.
class SplitConformalProjectedNormal {
 public:
  static SplitConformalProjectedNormal fit(const Matrix& x, std::span<const Angle> y,
                                           const ForestParams& forest, std::uint64_t seed,
                                           const PnFitOptions& options = {});

  const PnFitResult& fit_result() const noexcept { return fit_; }
  const ProjectedNormalModel& model() const noexcept { return fit_.model; }
  const Forest& variability_forest() const noexcept { return sigma_; }

  Angle predict_center(std::span<const double> x) const { return pn_predict(fit_.model, x); }
  double predict_sigma(std::span<const double> x) const;

  CalibrationResult calibrate(const Matrix& x, std::span<const Angle> y, double alpha) const;

  ConformalPrediction predict_with_threshold(std::span<const double> x, double threshold) const;

 private:
  PnFitResult fit_;
  Forest sigma_;
};

}  // namespace circpred
