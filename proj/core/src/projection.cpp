#include "circpred/projection.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <vector>

#include <spdlog/spdlog.h>

#include "circpred/error.hpp"

namespace circpred {

namespace {
std::atomic<std::size_t> g_perturbed{0};
}  // namespace

Angle project_components(double c, double s) noexcept {
  if (c == 0.0 && s == 0.0) {
    if (g_perturbed.fetch_add(1, std::memory_order_relaxed) == 0) {
      spdlog::warn("projected components were exactly (0, 0); using (eps, 0)");
    }
    c = std::numeric_limits<double>::epsilon();
  }
  return atan_project(c, s);
}

std::size_t perturbed_projection_count() noexcept {
  return g_perturbed.load(std::memory_order_relaxed);
}

ProjectedForest::ProjectedForest(Forest cos_forest, Forest sin_forest)
    : cos_(std::move(cos_forest)), sin_(std::move(sin_forest)) {
  const bool shared = cos_.shared_plan() == sin_.shared_plan() || cos_.plan() == sin_.plan();
  if (!shared) throw ConfigError("projected forest: cos and sin forests use different plans");
}

Angle ProjectedForest::predict_angle(std::span<const double> x) const {
  return atan_project(cos_.predict(x), sin_.predict(x));
}

Angle ProjectedForest::tree_angle(std::size_t tree, std::span<const double> x) const {
  return project_components(cos_.predict_tree(tree, x), sin_.predict_tree(tree, x));
}

Angle ProjectedForest::predict_subset(std::span<const std::uint32_t> trees,
                                      std::span<const double> x, AngleAveraging mode) const {
  if (trees.empty()) throw DomainError("projected forest: empty tree subset");
  const double count = static_cast<double>(trees.size());
  if (mode == AngleAveraging::arithmetic) {
    double sum = 0.0;
    for (const auto j : trees) sum += tree_angle(j, x).radians();
    return Angle(sum / count);
  }
  double c = 0.0;
  double s = 0.0;
  for (const auto j : trees) {
    c += cos_.predict_tree(j, x);
    s += sin_.predict_tree(j, x);
  }
  return project_components(c / count, s / count);
}

Angle ProjectedForest::predict_angle_oob(std::size_t unit, std::span<const double> x,
                                         AngleAveraging mode) const {
  const auto trees = plan().oob().trees_for(unit);
  if (trees.empty()) throw DomainError("no out-of-bag trees for unit " + std::to_string(unit));
  return predict_subset(trees, x, mode);
}

Angle ProjectedForest::predict_angle_fullbag(std::span<const double> x,
                                             AngleAveraging mode) const {
  const std::size_t b = size();
  if (mode == AngleAveraging::arithmetic) {
    double sum = 0.0;
    for (std::size_t j = 0; j < b; ++j) sum += tree_angle(j, x).radians();
    return Angle(sum / static_cast<double>(b));
  }
  return project_components(cos_.predict(x), sin_.predict(x));
}

ProjectedForest train_projected(const Matrix& x, std::span<const Angle> y,
                                std::shared_ptr<const BootstrapPlan> plan,
                                const ForestParams& params) {
  const FeatureOrder order(x);
  return train_projected(x, y, std::move(plan), params, order);
}

ProjectedForest train_projected(const Matrix& x, std::span<const Angle> y,
                                std::shared_ptr<const BootstrapPlan> plan,
                                const ForestParams& params, const FeatureOrder& order) {
  std::vector<double> c(y.size());
  std::vector<double> s(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    c[i] = std::cos(y[i].radians());
    s[i] = std::sin(y[i].radians());
  }
  return train_projected_components(x, c, s, std::move(plan), params, order);
}

ProjectedForest train_projected_components(const Matrix& x, std::span<const double> cos_target,
                                           std::span<const double> sin_target,
                                           std::shared_ptr<const BootstrapPlan> plan,
                                           const ForestParams& params,
                                           const FeatureOrder& order) {
  Forest cf = train_forest(x, cos_target, plan, params, order);
  Forest sf = train_forest(x, sin_target, plan, params, order);
  return ProjectedForest(std::move(cf), std::move(sf));
}

}  // namespace circpred
