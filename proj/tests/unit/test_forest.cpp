#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

#include "circpred/error.hpp"
#include "circpred/forest.hpp"
#include "circpred/random.hpp"

using namespace circpred;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  Engine rng(seed);
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) x(i, k) = uniform(rng, -1.0, 1.0);
  return x;
}

std::vector<double> smooth_response(const Matrix& x, std::uint64_t seed, double noise = 0.1) {
  Engine rng(seed);
  std::vector<double> y(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    y[i] = std::sin(2.0 * x(i, 0)) + x(i, 1) * x(i, 1) + noise * standard_normal(rng);
  }
  return y;
}

std::shared_ptr<const BootstrapPlan> share(BootstrapPlan p) {
  return std::make_shared<const BootstrapPlan>(std::move(p));
}

// Brute-force weighted CART with every feature a candidate: recursive, SSE
// recomputed from scratch for every cut.
struct NaiveCart {
  const Matrix& x;
  const std::vector<double>& y;
  std::size_t min_node;
  std::size_t max_depth;

  struct Node {
    int feature = -1;
    double threshold = 0.0;
    std::unique_ptr<Node> left, right;
    double value = 0.0;
  };

  static double sse(const std::vector<std::pair<std::size_t, double>>& units,
                    const std::vector<double>& y) {
    double w = 0, s = 0;
    for (auto [u, c] : units) { w += c; s += c * y[u]; }
    const double m = s / w;
    double out = 0;
    for (auto [u, c] : units) out += c * (y[u] - m) * (y[u] - m);
    return out;
  }

  std::unique_ptr<Node> build(const std::vector<std::pair<std::size_t, double>>& units,
                              std::size_t depth) const {
    auto node = std::make_unique<Node>();
    double w = 0, s = 0, lo = y[units[0].first], hi = lo;
    for (auto [u, c] : units) {
      w += c; s += c * y[u];
      lo = std::min(lo, y[u]); hi = std::max(hi, y[u]);
    }
    node->value = lo == hi ? lo : s / w;
    if (w <= static_cast<double>(min_node) || lo == hi || (max_depth && depth >= max_depth)) return node;

    const double parent = sse(units, y);
    double sum_sq = 0;
    for (auto [u, c] : units) sum_sq += c * y[u] * y[u];
    double best = parent;
    int best_f = -1;
    double best_t = 0;
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::vector<double> vals;
      for (auto [u, c] : units) vals.push_back(x(u, f));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        const double t = vals[k] + 0.5 * (vals[k + 1] - vals[k]);
        std::vector<std::pair<std::size_t, double>> l, r;
        for (auto p : units) (x(p.first, f) <= t ? l : r).push_back(p);
        const double total = sse(l, y) + sse(r, y);
        if (total < best - 1e-12 * sum_sq) {
          best = total; best_f = static_cast<int>(f); best_t = t;
        }
      }
    }
    if (best_f < 0) return node;
    node->feature = best_f;
    node->threshold = best_t;
    std::vector<std::pair<std::size_t, double>> l, r;
    for (auto p : units) (x(p.first, best_f) <= best_t ? l : r).push_back(p);
    node->left = build(l, depth + 1);
    node->right = build(r, depth + 1);
    return node;
  }

  static double predict(const Node& n, std::span<const double> row) {
    if (n.feature < 0) return n.value;
    return predict(row[n.feature] <= n.threshold ? *n.left : *n.right, row);
  }
};

}  // namespace

TEST(BootstrapPlan, SingleUnit) {
  const auto plan = BootstrapPlan::generate(1, 25, 3);
  for (std::size_t j = 0; j < plan.trees(); ++j) {
    ASSERT_EQ(plan.row(j).size(), 1u);
    EXPECT_EQ(plan.row(j)[0], 0u);
  }
  EXPECT_TRUE(plan.oob().trees_for(0).empty());
}

TEST(BootstrapPlan, DeterministicInSeed) {
  const auto a = BootstrapPlan::generate(100, 500, 7);
  const auto b = BootstrapPlan::generate(100, 500, 7);
  const auto c = BootstrapPlan::generate(100, 500, 8);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  for (std::size_t j = 0; j < a.trees(); ++j) {
    ASSERT_EQ(a.row(j).size(), 100u);
    for (const auto u : a.row(j)) ASSERT_LT(u, 100u);
  }
}

TEST(BootstrapPlan, OobFractionNearInverseE) {
  const auto plan = BootstrapPlan::generate(1000, 500, 11);
  double total = 0;
  for (std::size_t i = 0; i < 1000; ++i) total += plan.oob().trees_for(i).size();
  EXPECT_NEAR(total / (1000.0 * 500.0), std::exp(-1.0), 0.02);
}

TEST(BootstrapPlan, OobSetsExhaustive) {
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    const auto plan = BootstrapPlan::generate(7, 60, seed);
    for (std::size_t i = 0; i < 7; ++i) {
      const auto oob = plan.oob().trees_for(i);
      ASSERT_TRUE(std::is_sorted(oob.begin(), oob.end()));
      for (std::size_t j = 0; j < plan.trees(); ++j) {
        const auto row = plan.row(j);
        const bool absent = std::find(row.begin(), row.end(), i) == row.end();
        const bool listed = std::find(oob.begin(), oob.end(), j) != oob.end();
        ASSERT_EQ(absent, listed) << "unit " << i << " tree " << j;
      }
    }
  }
}

TEST(BootstrapPlan, CustomRows) {
  const auto plan = BootstrapPlan::from_rows(3, {{0, 0, 1}, {2}, {1, 2}});
  EXPECT_EQ(plan.trees(), 3u);
  EXPECT_FALSE(plan.generated());
  const auto oob0 = plan.oob().trees_for(0);
  EXPECT_EQ(std::vector<std::uint32_t>(oob0.begin(), oob0.end()), (std::vector<std::uint32_t>{1, 2}));
  EXPECT_EQ(plan.counts(0), (std::vector<std::uint32_t>{2, 1, 0}));
  EXPECT_THROW(BootstrapPlan::from_rows(3, {{0, 3}}), ConfigError);
  EXPECT_THROW(BootstrapPlan::from_rows(3, {{}}), ConfigError);
  EXPECT_THROW(BootstrapPlan::from_rows(3, {}), ConfigError);
  EXPECT_THROW(BootstrapPlan::generate(0, 3, 1), ConfigError);
  const auto seeded = BootstrapPlan::from_rows(2, {{0}, {1}}, 0, {42, 43});
  EXPECT_EQ(seeded.tree_seed(1), 43u);
}

TEST(ForestParams, DefaultFeatureCount) {
  ForestParams p;
  EXPECT_EQ(p.resolved_features(10), 4u);
  EXPECT_EQ(p.resolved_features(9), 3u);
  EXPECT_EQ(p.resolved_features(1), 1u);
  p.features_per_split = 50;
  EXPECT_EQ(p.resolved_features(10), 10u);
}

TEST(Cart, MatchesBruteForceOracle) {
  for (const std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const Matrix x = random_matrix(120, 3, seed);
    const auto y = smooth_response(x, seed + 100, 0.3);
    const auto plan = BootstrapPlan::generate(120, 1, seed);
    const auto counts = plan.counts(0);
    ForestParams params;
    params.features_per_split = 3;
    params.min_node_size = seed % 2 ? 5 : 1;
    params.max_depth = seed == 4 ? 3 : 0;
    const auto tree = fit_tree(x, y, counts, params, 9, FeatureOrder(x));

    std::vector<std::pair<std::size_t, double>> units;
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (counts[i]) units.emplace_back(i, counts[i]);
    const NaiveCart oracle{x, y, params.min_node_size, params.max_depth};
    const auto root = oracle.build(units, 0);

    const Matrix probe = random_matrix(500, 3, seed + 7);
    for (std::size_t i = 0; i < probe.rows(); ++i) {
      ASSERT_NEAR(tree.predict(probe.row(i)), NaiveCart::predict(*root, probe.row(i)), 1e-10);
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
      ASSERT_NEAR(tree.predict(x.row(i)), NaiveCart::predict(*root, x.row(i)), 1e-10);
    }
    if (params.max_depth) EXPECT_LE(tree.depth(), params.max_depth);
  }
}

TEST(Cart, InBagUnitsReachOneFiniteLeafAndNodeSizeIsRespected) {
  const Matrix x = random_matrix(400, 4, 5);
  const auto y = smooth_response(x, 6);
  const auto plan = BootstrapPlan::generate(400, 1, 5);
  const auto counts = plan.counts(0);
  ForestParams params;
  const auto tree = fit_tree(x, y, counts, params, 1, FeatureOrder(x));
  // Route every in-bag unit, accumulating bootstrap weight per leaf.
  std::vector<double> leaf_weight(tree.nodes().size(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (!counts[i]) continue;
    std::size_t k = 0;
    while (!tree.nodes()[k].is_leaf()) {
      const auto& n = tree.nodes()[k];
      k = x(i, n.feature) <= n.threshold ? n.left : n.right;
    }
    leaf_weight[k] += counts[i];
  }
  for (std::size_t k = 0; k < tree.nodes().size(); ++k) {
    const auto& n = tree.nodes()[k];
    if (n.is_leaf()) {
      EXPECT_TRUE(std::isfinite(n.value));
      EXPECT_GT(leaf_weight[k], 0.0);
    }
  }
  EXPECT_EQ(tree.leaf_count() * 2 - 1, tree.nodes().size());
}

TEST(Forest, ConstantResponse) {
  const Matrix x = random_matrix(60, 3, 1);
  const std::vector<double> y(60, 0.37);
  ForestParams p;
  p.trees = 20;
  const auto f = train_forest(x, y, share(BootstrapPlan::generate(60, 20, 1)), p);
  const Matrix probe = random_matrix(50, 3, 2);
  for (std::size_t i = 0; i < probe.rows(); ++i) {
    for (std::size_t j = 0; j < f.size(); ++j) ASSERT_EQ(f.predict_tree(j, probe.row(i)), 0.37);
    ASSERT_NEAR(f.predict(probe.row(i)), 0.37, 1e-15);
  }
}

TEST(Forest, TinySampleGivesSingleLeafTrees) {
  const Matrix x = random_matrix(4, 2, 1);
  const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
  ForestParams p;
  const auto f = train_forest(x, y, share(BootstrapPlan::generate(4, 10, 1)), p);
  for (const auto& t : f.trees()) EXPECT_EQ(t.nodes().size(), 1u);
}

TEST(Forest, RecoversStep) {
  const std::size_t n = 300;
  Matrix x(n, 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = i < n / 2 ? -1.0 + i * 1e-3 : 1.0 + i * 1e-3;
    y[i] = i < n / 2 ? -2.0 : 3.0;
  }
  ForestParams p;
  p.trees = 50;
  p.min_node_size = 1;
  const auto f = train_forest(x, y, share(BootstrapPlan::generate(n, 50, 4)), p);
  for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(f.predict(x.row(i)), y[i], 1e-12);
}

TEST(Forest, MonotoneResponseGivesMonotonePredictions) {
  const std::size_t n = 2000;
  Engine rng(8);
  Matrix x(n, 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = uniform(rng, 0.0, 1.0);
    y[i] = 3.0 * x(i, 0) + 0.05 * standard_normal(rng);
  }
  ForestParams p;
  p.trees = 100;
  const auto f = train_forest(x, y, share(BootstrapPlan::generate(n, 100, 9)), p);
  double prev = -1e9;
  for (int g = 0; g <= 10; ++g) {
    const std::vector<double> q{0.05 + 0.09 * g};
    const double v = f.predict(q);
    EXPECT_GT(v, prev) << g;
    prev = v;
  }
}

TEST(Forest, PredictIsMeanOfTrees) {
  const Matrix x = random_matrix(200, 5, 3);
  const auto y = smooth_response(x, 4);
  ForestParams p;
  p.trees = 40;
  const auto f = train_forest(x, y, share(BootstrapPlan::generate(200, 40, 2)), p);
  std::vector<std::uint32_t> all(40);
  std::iota(all.begin(), all.end(), 0u);
  const Matrix probe = random_matrix(30, 5, 9);
  for (std::size_t i = 0; i < probe.rows(); ++i) {
    const auto outs = f.predict_trees(all, probe.row(i));
    const double mean = std::accumulate(outs.begin(), outs.end(), 0.0) / outs.size();
    ASSERT_NEAR(mean, f.predict(probe.row(i)), 1e-12);
    const std::vector<std::uint32_t> one{7};
    ASSERT_EQ(f.predict_trees(one, probe.row(i))[0], f.trees()[7].predict(probe.row(i)));
    std::vector<std::uint32_t> even, odd;
    for (std::uint32_t j = 0; j < 40; ++j) (j % 2 ? odd : even).push_back(j);
    auto a = f.predict_trees(even, probe.row(i));
    const auto b = f.predict_trees(odd, probe.row(i));
    a.insert(a.end(), b.begin(), b.end());
    auto sorted_all = outs;
    std::sort(a.begin(), a.end());
    std::sort(sorted_all.begin(), sorted_all.end());
    ASSERT_EQ(a, sorted_all);
  }
  EXPECT_TRUE(f.predict_trees({}, probe.row(0)).empty());
}

TEST(Forest, DeterministicAcrossThreadCounts) {
  const Matrix x = random_matrix(500, 6, 1);
  const auto y = smooth_response(x, 2);
  const auto plan = share(BootstrapPlan::generate(500, 64, 3));
  ForestParams p;
  p.trees = 64;
  p.threads = 1;
  const auto a = train_forest(x, y, plan, p);
  p.threads = 4;
  const auto b = train_forest(x, y, plan, p);
  p.threads = 7;
  const auto c = train_forest(x, y, plan, p);
  EXPECT_EQ(a.trees(), b.trees());
  EXPECT_EQ(a.trees(), c.trees());
}

TEST(Forest, BaggingIdentity) {
  const std::size_t n = 150;
  const Matrix x = random_matrix(n, 4, 12);
  const auto y = smooth_response(x, 13);
  std::vector<std::uint32_t> row(n);
  std::iota(row.begin(), row.end(), 0u);
  const auto plan = share(BootstrapPlan::from_rows(n, {row}, 5));
  ForestParams p;
  p.trees = 1;
  const auto f = train_forest(x, y, plan, p);
  const std::vector<std::uint32_t> ones(n, 1);
  const auto tree = fit_tree(x, y, ones, p, plan->tree_seed(0), FeatureOrder(x));
  EXPECT_EQ(f.trees()[0], tree);
}

TEST(Forest, RelabelingSymmetry) {
  const std::size_t n = 200;
  const Matrix x = random_matrix(n, 4, 21);
  const auto y = smooth_response(x, 22);
  const auto plan = BootstrapPlan::generate(n, 30, 23);

  // new unit k is old unit perm[k]
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Engine rng(24);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  std::vector<std::uint32_t> inverse(n);
  for (std::size_t k = 0; k < n; ++k) inverse[perm[k]] = static_cast<std::uint32_t>(k);

  const Matrix x2 = x.select_rows(perm);
  std::vector<double> y2(n);
  for (std::size_t k = 0; k < n; ++k) y2[k] = y[perm[k]];
  std::vector<std::vector<std::uint32_t>> rows2;
  std::vector<std::uint64_t> seeds;
  for (std::size_t j = 0; j < plan.trees(); ++j) {
    std::vector<std::uint32_t> r;
    for (const auto u : plan.row(j)) r.push_back(inverse[u]);
    rows2.push_back(std::move(r));
    seeds.push_back(plan.tree_seed(j));
  }
  ForestParams p;
  p.trees = 30;
  const auto a = train_forest(x, y, share(plan), p);
  const auto b = train_forest(x2, y2, share(BootstrapPlan::from_rows(n, rows2, 0, seeds)), p);
  const Matrix probe = random_matrix(100, 4, 25);
  for (std::size_t i = 0; i < probe.rows(); ++i) {
    ASSERT_EQ(a.predict(probe.row(i)), b.predict(probe.row(i)));
  }
}

TEST(Forest, InputValidation) {
  const Matrix x = random_matrix(10, 2, 1);
  std::vector<double> y(9, 0.0);
  ForestParams p;
  EXPECT_THROW(train_forest(x, y, share(BootstrapPlan::generate(10, 2, 1)), p), ConfigError);
  y.resize(10, 0.0);
  EXPECT_THROW(train_forest(x, y, share(BootstrapPlan::generate(11, 2, 1)), p), ConfigError);
  y[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train_forest(x, y, share(BootstrapPlan::generate(10, 2, 1)), p), DataError);
}

TEST(ForestIo, RoundTripIsBitExact) {
  const Matrix x = random_matrix(300, 5, 31);
  const auto y = smooth_response(x, 32);
  ForestParams p;
  p.trees = 25;
  p.max_depth = 12;
  for (const bool custom : {false, true}) {
    auto plan = custom ? share(BootstrapPlan::from_rows(300, {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12},
                                                              {5, 5, 6, 7, 100, 200, 250, 299}}, 4, {1, 2}))
                       : share(BootstrapPlan::generate(300, 25, 33));
    p.trees = plan->trees();
    const auto f = train_forest(x, y, plan, p);
    std::stringstream ss;
    save_forest(f, ss);
    const auto g = load_forest(ss);
    EXPECT_EQ(f.trees(), g.trees());
    EXPECT_TRUE(f.plan() == g.plan());
    EXPECT_EQ(g.params().max_depth, 12u);
    const Matrix probe = random_matrix(100, 5, 34);
    for (std::size_t i = 0; i < probe.rows(); ++i) ASSERT_EQ(f.predict(probe.row(i)), g.predict(probe.row(i)));
  }
}

TEST(ForestIo, RejectsMalformedInput) {
  std::stringstream bad("not-a-forest 1\n");
  EXPECT_THROW(load_forest(bad), DataError);
  std::stringstream version("circpred-forest 99\n");
  EXPECT_THROW(load_forest(version), DataError);

  const Matrix x = random_matrix(30, 2, 1);
  const auto y = smooth_response(x, 2);
  ForestParams p;
  p.trees = 3;
  const auto f = train_forest(x, y, share(BootstrapPlan::generate(30, 3, 1)), p);
  std::stringstream ss;
  save_forest(f, ss);
  std::string text = ss.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_forest(truncated), DataError);
  EXPECT_THROW(load_forest(std::string("/nonexistent/dir/forest.txt")), IoError);
}
