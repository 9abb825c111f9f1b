#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "circpred/matrix.hpp"

namespace circpred {

/// Per-unit out-of-bag tree lists in compressed form.
/// trees_for(i) holds, in ascending order, every tree whose bootstrap row
/// does not contain unit i.
class OobIndex {
 public:
  OobIndex() = default;
  OobIndex(std::vector<std::size_t> offsets, std::vector<std::uint32_t> trees)
      : offsets_(std::move(offsets)), trees_(std::move(trees)) {}

  std::size_t units() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  std::span<const std::uint32_t> trees_for(std::size_t unit) const {
    return {trees_.data() + offsets_[unit], offsets_[unit + 1] - offsets_[unit]};
  }

  bool operator==(const OobIndex&) const = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> trees_;
};

/// The bootstrap samples shared by every forest trained on one dataset.
/// Unit indices are 0-based. Row j is drawn from a stream derived from
/// (seed, j) alone, so the plan is identical on every platform and for any
/// thread count.
class BootstrapPlan {
 public:
  /// B rows of n draws with replacement from {0, ..., n-1}.
  static BootstrapPlan generate(std::size_t n, std::size_t trees, std::uint64_t seed);

  /// Explicit rows (test injection, exhaustive enumeration). Rows may have
  /// any nonempty length; every entry must be < n. `tree_seeds`, when given,
  /// overrides the per-tree feature-sampling seeds.
  static BootstrapPlan from_rows(std::size_t n, std::vector<std::vector<std::uint32_t>> rows,
                                 std::uint64_t seed = 0,
                                 std::vector<std::uint64_t> tree_seeds = {});

  std::size_t units() const noexcept { return n_; }
  std::size_t trees() const noexcept { return offsets_.size() - 1; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool generated() const noexcept { return generated_; }

  std::span<const std::uint32_t> row(std::size_t tree) const {
    return {draws_.data() + offsets_[tree], offsets_[tree + 1] - offsets_[tree]};
  }

  /// Seed for tree `tree`'s feature-subsampling stream.
  std::uint64_t tree_seed(std::size_t tree) const;

  const OobIndex& oob() const noexcept { return oob_; }

  /// Per-unit draw multiplicities for one row.
  std::vector<std::uint32_t> counts(std::size_t tree) const;

  bool operator==(const BootstrapPlan&) const = default;

 private:
  BootstrapPlan() = default;
  void build_oob();

  std::size_t n_ = 0;
  std::uint64_t seed_ = 0;
  bool generated_ = false;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> draws_;
  std::vector<std::uint64_t> tree_seeds_;
  OobIndex oob_;
};

struct ForestParams {
  std::size_t trees = 500;
  /// Candidate features per split; 0 selects ceil(d / 3).
  std::size_t features_per_split = 0;
  /// A node is split only while it holds more than this many bootstrap draws.
  std::size_t min_node_size = 5;
  /// 0 means unlimited.
  std::size_t max_depth = 0;
  /// Worker threads for training (0 = default). Never affects results.
  std::size_t threads = 0;

  std::size_t resolved_features(std::size_t d) const;
};

struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;  // x[feature] <= threshold goes left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;      // in-leaf mean response (leaves only)

  bool is_leaf() const noexcept { return feature == kLeaf; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const;

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_count() const;
  std::size_t depth() const;

  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Column-sorted unit orderings of a predictor matrix, reusable across every
/// tree (and every forest) trained on that matrix.
class FeatureOrder {
 public:
  explicit FeatureOrder(const Matrix& x);

  std::span<const std::uint32_t> sorted(std::size_t feature) const {
    return {order_.data() + feature * n_, n_};
  }
  std::size_t units() const noexcept { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint32_t> order_;
};

/// Grows one CART tree by greedy variance reduction on the units with
/// nonzero `counts` (bootstrap multiplicities act as integer weights).
RegressionTree fit_tree(const Matrix& x, std::span<const double> y,
                        std::span<const std::uint32_t> counts, const ForestParams& params,
                        std::uint64_t feature_seed, const FeatureOrder& order);

class Forest {
 public:
  Forest() = default;
  Forest(std::vector<RegressionTree> trees, std::shared_ptr<const BootstrapPlan> plan,
         ForestParams params, std::size_t features);

  /// Mean of all tree outputs.
  double predict(std::span<const double> x) const;
  double predict_tree(std::size_t tree, std::span<const double> x) const {
    return trees_[tree].predict(x);
  }
  /// Raw outputs of the given trees, in the given order.
  std::vector<double> predict_trees(std::span<const std::uint32_t> subset,
                                    std::span<const double> x) const;

  std::size_t size() const noexcept { return trees_.size(); }
  std::size_t features() const noexcept { return features_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  const BootstrapPlan& plan() const noexcept { return *plan_; }
  std::shared_ptr<const BootstrapPlan> shared_plan() const noexcept { return plan_; }
  const OobIndex& oob() const noexcept { return plan_->oob(); }
  const ForestParams& params() const noexcept { return params_; }

 private:
  std::vector<RegressionTree> trees_;
  std::shared_ptr<const BootstrapPlan> plan_;
  ForestParams params_;
  std::size_t features_ = 0;
};

/// Trains plan.trees() trees; tree j sees only plan row j.
Forest train_forest(const Matrix& x, std::span<const double> y,
                    std::shared_ptr<const BootstrapPlan> plan, const ForestParams& params);

/// Overload that reuses a precomputed FeatureOrder for `x`.
Forest train_forest(const Matrix& x, std::span<const double> y,
                    std::shared_ptr<const BootstrapPlan> plan, const ForestParams& params,
                    const FeatureOrder& order);

// Versioned text format; floating-point fields are written as hex floats so
// a loaded forest predicts bit-identically.
void save_forest(const Forest& forest, std::ostream& out);
Forest load_forest(std::istream& in);
void save_forest(const Forest& forest, const std::string& path);
Forest load_forest(const std::string& path);

}  // namespace circpred
