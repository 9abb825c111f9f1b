#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

#include "circpred/circular.hpp"
#include "circpred/forest.hpp"
#include "circpred/matrix.hpp"

namespace circpred {

/// How per-tree projected angles are combined into one prediction.
enum class AngleAveraging {
  /// Arithmetic mean of the per-tree atan values in [0, 2π).
  arithmetic,
  /// Mean cos and sin components across trees, then one atan.
  components,
};

/// atan_project that never throws: an exact (0, 0) pair is nudged to
/// (DBL_EPSILON, 0), counted, and a warning is logged on first use.
Angle project_components(double c, double s) noexcept;

/// Number of (0, 0) pairs nudged by project_components in this process.
std::size_t perturbed_projection_count() noexcept;

template <class R>
concept LinearRegressor = requires(const R& r, std::span<const double> x) {
  { r.predict(x) } -> std::convertible_to<double>;
};

/// Circular predictor made from two linear-response models fitted to cos(y)
/// and sin(y).
template <LinearRegressor R>
struct ProjectedModel {
  R cos_model;
  R sin_model;

  /// atan_project of the two full-model predictions; throws DomainError when
  /// both are exactly zero.
  Angle predict_angle(std::span<const double> x) const {
    return atan_project(cos_model.predict(x), sin_model.predict(x));
  }
};

/// Projected random forest: cos and sin forests grown on one shared plan, so
/// tree j of each forest saw the same bootstrap sample and the two forests
/// have identical out-of-bag sets.
class ProjectedForest {
 public:
  ProjectedForest() = default;
  /// Throws ConfigError unless both forests were trained on the same plan.
  ProjectedForest(Forest cos_forest, Forest sin_forest);

  const Forest& cos_forest() const noexcept { return cos_; }
  const Forest& sin_forest() const noexcept { return sin_; }
  const BootstrapPlan& plan() const noexcept { return cos_.plan(); }
  std::size_t size() const noexcept { return cos_.size(); }

  /// atan of the averaged components (the generic projected predictor).
  Angle predict_angle(std::span<const double> x) const;

  /// Projected angle of a single tree pair.
  Angle tree_angle(std::size_t tree, std::span<const double> x) const;

  /// Combined prediction over an arbitrary tree subset. Throws DomainError if
  /// the subset is empty.
  Angle predict_subset(std::span<const std::uint32_t> trees, std::span<const double> x,
                       AngleAveraging mode = AngleAveraging::arithmetic) const;

  /// Combined prediction over the out-of-bag trees of training unit `unit`.
  /// Throws DomainError when that unit has no out-of-bag trees.
  Angle predict_angle_oob(std::size_t unit, std::span<const double> x,
                          AngleAveraging mode = AngleAveraging::arithmetic) const;

  bool has_oob(std::size_t unit) const { return !plan().oob().trees_for(unit).empty(); }

  /// Combined prediction over all B trees.
  Angle predict_angle_fullbag(std::span<const double> x,
                              AngleAveraging mode = AngleAveraging::arithmetic) const;

 private:
  Forest cos_;
  Forest sin_;
};

/// Fits the cos and sin forests on one shared plan.
ProjectedForest train_projected(const Matrix& x, std::span<const Angle> y,
                                std::shared_ptr<const BootstrapPlan> plan,
                                const ForestParams& params);

ProjectedForest train_projected(const Matrix& x, std::span<const Angle> y,
                                std::shared_ptr<const BootstrapPlan> plan,
                                const ForestParams& params, const FeatureOrder& order);

/// Same, on raw cos/sin targets (used for the variability forests, whose
/// targets are cos and sin of the residuals).
ProjectedForest train_projected_components(const Matrix& x, std::span<const double> cos_target,
                                           std::span<const double> sin_target,
                                           std::shared_ptr<const BootstrapPlan> plan,
                                           const ForestParams& params, const FeatureOrder& order);

}  // namespace circpred
