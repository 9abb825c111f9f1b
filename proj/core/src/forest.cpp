#include "circpred/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "circpred/error.hpp"
#include "circpred/parallel.hpp"
#include "circpred/random.hpp"

namespace circpred {

// ---------------------------------------------------------------------------
// BootstrapPlan

BootstrapPlan BootstrapPlan::generate(std::size_t n, std::size_t trees, std::uint64_t seed) {
  if (n == 0) throw ConfigError("bootstrap plan needs at least one unit");
  if (trees == 0) throw ConfigError("bootstrap plan needs at least one tree");
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("bootstrap plan: too many units");
  }

  BootstrapPlan plan;
  plan.n_ = n;
  plan.seed_ = seed;
  plan.generated_ = true;
  plan.offsets_.resize(trees + 1);
  for (std::size_t j = 0; j <= trees; ++j) plan.offsets_[j] = j * n;
  plan.draws_.resize(trees * n);
  for (std::size_t j = 0; j < trees; ++j) {
    Engine rng(derive_seed(seed, j));
    auto* out = plan.draws_.data() + j * n;
    for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<std::uint32_t>(uniform_index(rng, n));
  }
  plan.build_oob();
  return plan;
}

BootstrapPlan BootstrapPlan::from_rows(std::size_t n,
                                       std::vector<std::vector<std::uint32_t>> rows,
                                       std::uint64_t seed,
                                       std::vector<std::uint64_t> tree_seeds) {
  if (n == 0) throw ConfigError("bootstrap plan needs at least one unit");
  if (rows.empty()) throw ConfigError("bootstrap plan needs at least one tree");
  if (!tree_seeds.empty() && tree_seeds.size() != rows.size()) {
    throw ConfigError("bootstrap plan: tree_seeds must match the number of rows");
  }
  BootstrapPlan plan;
  plan.n_ = n;
  plan.seed_ = seed;
  plan.tree_seeds_ = std::move(tree_seeds);
  plan.offsets_.assign(1, 0);
  for (const auto& r : rows) {
    if (r.empty()) throw ConfigError("bootstrap plan: empty row");
    for (const auto u : r) {
      if (u >= n) throw ConfigError("bootstrap plan: unit index out of range");
    }
    plan.draws_.insert(plan.draws_.end(), r.begin(), r.end());
    plan.offsets_.push_back(plan.draws_.size());
  }
  plan.build_oob();
  return plan;
}

std::uint64_t BootstrapPlan::tree_seed(std::size_t tree) const {
  if (!tree_seeds_.empty()) return tree_seeds_[tree];
  return derive_seed(~seed_, tree);
}

std::vector<std::uint32_t> BootstrapPlan::counts(std::size_t tree) const {
  std::vector<std::uint32_t> c(n_, 0);
  for (const auto u : row(tree)) ++c[u];
  return c;
}

void BootstrapPlan::build_oob() {
  const std::size_t b = trees();
  std::vector<std::size_t> sizes(n_, 0);
  std::vector<std::uint32_t> seen(n_, 0);  // stores tree + 1 of the last row containing the unit
  for (std::size_t j = 0; j < b; ++j) {
    for (const auto u : row(j)) seen[u] = static_cast<std::uint32_t>(j + 1);
    for (std::size_t i = 0; i < n_; ++i) {
      if (seen[i] != j + 1) ++sizes[i];
    }
  }
  std::vector<std::size_t> offsets(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) offsets[i + 1] = offsets[i] + sizes[i];
  std::vector<std::uint32_t> trees(offsets.back());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  std::fill(seen.begin(), seen.end(), 0);
  for (std::size_t j = 0; j < b; ++j) {
    for (const auto u : row(j)) seen[u] = static_cast<std::uint32_t>(j + 1);
    for (std::size_t i = 0; i < n_; ++i) {
      if (seen[i] != j + 1) trees[cursor[i]++] = static_cast<std::uint32_t>(j);
    }
  }
  oob_ = OobIndex(std::move(offsets), std::move(trees));
}

// ---------------------------------------------------------------------------
// Trees

std::size_t ForestParams::resolved_features(std::size_t d) const {
  if (d == 0) return 0;
  const std::size_t m = features_per_split == 0 ? (d + 2) / 3 : features_per_split;
  return std::clamp<std::size_t>(m, 1, d);
}

double RegressionTree::predict(std::span<const double> x) const {
  std::uint32_t k = 0;
  for (;;) {
    const TreeNode& node = nodes_[k];
    if (node.is_leaf()) return node.value;
    k = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::size_t> level(nodes_.size(), 0);
  std::size_t deepest = 0;
  // Children always have larger ids than their parent.
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const TreeNode& n = nodes_[k];
    deepest = std::max(deepest, level[k]);
    if (!n.is_leaf()) {
      level[n.left] = level[k] + 1;
      level[n.right] = level[k] + 1;
    }
  }
  return deepest;
}

FeatureOrder::FeatureOrder(const Matrix& x) : n_(x.rows()), order_(x.rows() * x.cols()) {
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto* begin = order_.data() + f * n_;
    std::iota(begin, begin + n_, 0u);
    std::stable_sort(begin, begin + n_, [&](std::uint32_t a, std::uint32_t b) {
      return x(a, f) < x(b, f);
    });
  }
}

namespace {

constexpr double kTieTolerance = 1e-12;

struct Entry {
  double x;
  std::uint32_t unit;
};

struct Split {
  std::size_t feature = 0;
  std::size_t position = 0;  // last entry (relative to node begin) that goes left
  double threshold = 0.0;
};

// Presorted CART. Each feature keeps its own sorted list of in-bag units;
// the lists are stably partitioned at every split so each node owns the
// same [begin, end) range in every list.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> y, std::span<const std::uint32_t> counts,
              const ForestParams& params, std::uint64_t seed, const FeatureOrder& order)
      : y_(y),
        counts_(counts),
        params_(params),
        rng_(seed),
        d_(x.cols()),
        mtry_(params.resolved_features(x.cols())),
        goes_left_(x.rows(), 0),
        candidates_(x.cols()) {
    for (std::size_t i = 0; i < counts.size(); ++i) m_ += counts[i] > 0 ? 1 : 0;
    entries_.resize(d_ * m_);
    scratch_.resize(m_);
    for (std::size_t f = 0; f < d_; ++f) {
      Entry* out = entries_.data() + f * m_;
      for (const auto u : order.sorted(f)) {
        if (counts[u] > 0) *out++ = {x(u, f), u};
      }
    }
  }

  RegressionTree build() {
    if (m_ == 0) return RegressionTree({TreeNode{}});
    if (d_ == 0) {
      double weight = 0.0;
      double sum = 0.0;
      for (std::size_t u = 0; u < counts_.size(); ++u) {
        weight += counts_[u];
        sum += counts_[u] * y_[u];
      }
      TreeNode leaf;
      leaf.value = sum / weight;
      return RegressionTree({leaf});
    }
    struct Pending {
      std::uint32_t node;
      std::size_t begin, end, depth;
    };
    std::vector<TreeNode> nodes(1);
    std::vector<Pending> stack{{0, 0, m_, 0}};
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();

      double weight = 0.0;
      double sum = 0.0;
      double lo = y_[entries_[p.begin].unit];
      double hi = lo;
      // Feature 0's order is a function of the data alone, which keeps the
      // leaf sums independent of unit labelling.
      for (std::size_t k = p.begin; k < p.end; ++k) {
        const auto u = entries_[k].unit;
        const double w = counts_[u];
        weight += w;
        sum += w * y_[u];
        lo = std::min(lo, y_[u]);
        hi = std::max(hi, y_[u]);
      }

      const bool too_small = weight <= static_cast<double>(params_.min_node_size);
      const bool too_deep = params_.max_depth != 0 && p.depth >= params_.max_depth;
      std::optional<Split> split;
      if (!too_small && !too_deep && lo != hi) {
        split = find_split(p.begin, p.end, weight, sum);
      }

      if (!split) {
        nodes[p.node].feature = TreeNode::kLeaf;
        nodes[p.node].value = lo == hi ? lo : sum / weight;
        continue;
      }

      const std::size_t mid = p.begin + split->position + 1;
      partition(*split, p.begin, p.end);
      const auto left = static_cast<std::uint32_t>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      TreeNode& node = nodes[p.node];
      node.feature = static_cast<std::int32_t>(split->feature);
      node.threshold = split->threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, mid, p.end, p.depth + 1});
      stack.push_back({left, p.begin, mid, p.depth + 1});
    }
    return RegressionTree(std::move(nodes));
  }

 private:
  std::optional<Split> find_split(std::size_t begin, std::size_t end, double weight, double sum) {
    std::iota(candidates_.begin(), candidates_.end(), std::size_t{0});
    for (std::size_t k = 0; k < mtry_; ++k) {
      const auto pick = k + uniform_index(rng_, d_ - k);
      std::swap(candidates_[k], candidates_[pick]);
    }
    std::sort(candidates_.begin(), candidates_.begin() + static_cast<std::ptrdiff_t>(mtry_));

    const double parent = sum * sum / weight;
    double best = parent;
    std::optional<Split> result;
    for (std::size_t c = 0; c < mtry_; ++c) {
      const std::size_t f = candidates_[c];
      const Entry* e = entries_.data() + f * m_;
      double wl = 0.0;
      double sl = 0.0;
      for (std::size_t k = begin; k + 1 < end; ++k) {
        const auto u = e[k].unit;
        const double w = counts_[u];
        wl += w;
        sl += w * y_[u];
        if (!(e[k].x < e[k + 1].x)) continue;
        const double wr = weight - wl;
        const double sr = sum - sl;
        const double score = sl * sl / wl + sr * sr / wr;
        // Cuts inducing the same partition through different features can
        // differ by rounding alone; those still go to the lowest feature.
        if (score > best + kTieTolerance * best) {
          best = score;
          double t = e[k].x + 0.5 * (e[k + 1].x - e[k].x);
          if (!(t < e[k + 1].x)) t = e[k].x;
          result = Split{f, k - begin, t};
        }
      }
    }
    return result;
  }

  void partition(const Split& split, std::size_t begin, std::size_t end) {
    const Entry* chosen = entries_.data() + split.feature * m_;
    for (std::size_t k = begin; k < end; ++k) {
      goes_left_[chosen[k].unit] = (k - begin) <= split.position ? 1 : 0;
    }
    for (std::size_t f = 0; f < d_; ++f) {
      Entry* e = entries_.data() + f * m_;
      std::size_t write = begin;
      std::size_t spill = 0;
      for (std::size_t k = begin; k < end; ++k) {
        if (goes_left_[e[k].unit]) {
          e[write++] = e[k];
        } else {
          scratch_[spill++] = e[k];
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(spill),
                e + write);
    }
  }

  std::span<const double> y_;
  std::span<const std::uint32_t> counts_;
  const ForestParams& params_;
  Engine rng_;
  std::size_t d_;
  std::size_t mtry_;
  std::size_t m_ = 0;
  std::vector<Entry> entries_;
  std::vector<Entry> scratch_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::size_t> candidates_;
};

void check_inputs(const Matrix& x, std::span<const double> y) {
  if (x.rows() != y.size()) {
    throw ConfigError("predictor rows (" + std::to_string(x.rows()) +
                      ") do not match response length (" + std::to_string(y.size()) + ")");
  }
  for (const double v : x.data()) {
    if (!std::isfinite(v)) throw DataError("predictor matrix contains a non-finite value");
  }
  for (const double v : y) {
    if (!std::isfinite(v)) throw DataError("response contains a non-finite value");
  }
}

}  // namespace

RegressionTree fit_tree(const Matrix& x, std::span<const double> y,
                        std::span<const std::uint32_t> counts, const ForestParams& params,
                        std::uint64_t feature_seed, const FeatureOrder& order) {
  if (counts.size() != x.rows() || y.size() != x.rows()) {
    throw ConfigError("fit_tree: counts, responses and predictors disagree in length");
  }
  return TreeBuilder(x, y, counts, params, feature_seed, order).build();
}

// ---------------------------------------------------------------------------
// Forest

Forest::Forest(std::vector<RegressionTree> trees, std::shared_ptr<const BootstrapPlan> plan,
               ForestParams params, std::size_t features)
    : trees_(std::move(trees)), plan_(std::move(plan)), params_(params), features_(features) {}

double Forest::predict(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> Forest::predict_trees(std::span<const std::uint32_t> subset,
                                          std::span<const double> x) const {
  std::vector<double> out;
  out.reserve(subset.size());
  for (const auto j : subset) {
    if (j >= trees_.size()) throw ConfigError("predict_trees: tree index out of range");
    out.push_back(trees_[j].predict(x));
  }
  return out;
}

Forest train_forest(const Matrix& x, std::span<const double> y,
                    std::shared_ptr<const BootstrapPlan> plan, const ForestParams& params) {
  check_inputs(x, y);
  const FeatureOrder order(x);
  return train_forest(x, y, std::move(plan), params, order);
}

Forest train_forest(const Matrix& x, std::span<const double> y,
                    std::shared_ptr<const BootstrapPlan> plan, const ForestParams& params,
                    const FeatureOrder& order) {
  if (!plan) throw ConfigError("train_forest: missing bootstrap plan");
  check_inputs(x, y);
  if (plan->units() != x.rows()) {
    throw ConfigError("train_forest: plan covers " + std::to_string(plan->units()) +
                      " units but the data has " + std::to_string(x.rows()));
  }
  if (order.units() != x.rows()) throw ConfigError("train_forest: stale feature order");

  std::vector<RegressionTree> trees(plan->trees());
  parallel_for(trees.size(), params.threads, [&](std::size_t j) {
    const auto counts = plan->counts(j);
    trees[j] = fit_tree(x, y, counts, params, plan->tree_seed(j), order);
  });
  return Forest(std::move(trees), std::move(plan), params, x.cols());
}

}  // namespace circpred
