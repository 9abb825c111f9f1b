#include <bit>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "circpred/conformal.hpp"
#include "circpred/random.hpp"

namespace circpred {

std::size_t exhaustive_bootstrap_size(std::size_t units) {
  std::size_t b = 1;
  for (std::size_t k = 0; k < units; ++k) b *= units;
  return b;
}

std::vector<double> idealized_oob_scores(const Matrix& x, std::span<const double> y,
                                         const ForestParams& stump) {
  const std::size_t units = y.size();
  if (x.rows() != units) throw ConfigError("idealized scores: predictors and responses differ");
  if (units < 2) throw ConfigError("idealized scores need at least one unit plus the held-out pair");
  if (units > 6) {
    throw ConfigError("idealized scores: exhaustive bootstrap limited to n <= 5 (plus one held-out unit), got n = " +
                      std::to_string(units - 1));
  }

  // A row's seed depends only on the multiset of (x_i, y_i) it contains, so
  // the construction is invariant under any relabeling of the units.
  std::vector<std::uint64_t> fingerprint(units);
  for (std::size_t i = 0; i < units; ++i) {
    std::uint64_t h = mix64(std::bit_cast<std::uint64_t>(y[i]));
    for (const double v : x.row(i)) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    fingerprint[i] = h;
  }

  const std::size_t rows = exhaustive_bootstrap_size(units);
  std::vector<std::vector<std::uint32_t>> plan_rows(rows);
  std::vector<std::uint64_t> seeds(rows);
  std::vector<std::uint32_t> digits(units, 0);
  std::vector<std::uint64_t> contents(units);
  for (std::size_t r = 0; r < rows; ++r) {
    plan_rows[r] = digits;
    for (std::size_t k = 0; k < units; ++k) contents[k] = fingerprint[digits[k]];
    seeds[r] = symmetric_hash(contents);
    // Lexicographic successor, last position fastest.
    for (std::size_t k = units; k-- > 0;) {
      if (++digits[k] < units) break;
      digits[k] = 0;
    }
  }

  const auto plan = std::make_shared<const BootstrapPlan>(
      BootstrapPlan::from_rows(units, std::move(plan_rows), 0, std::move(seeds)));
  ForestParams params = stump;
  params.trees = rows;
  params.threads = 1;
  const Forest forest = train_forest(x, y, plan, params);

  std::vector<double> scores(units);
  for (std::size_t i = 0; i < units; ++i) {
    const auto oob = plan->oob().trees_for(i);
    double sum = 0.0;
    for (const auto j : oob) sum += forest.predict_tree(j, x.row(i));
    scores[i] = std::fabs(y[i] - sum / static_cast<double>(oob.size()));
  }
  return scores;
}

}  // namespace circpred
