#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "circpred/error.hpp"
#include "circpred/forest.hpp"

namespace circpred {

namespace {

constexpr std::string_view kMagic = "circpred-forest";
constexpr int kVersion = 1;

// Format:
//   circpred-forest 1
//   params <trees> <features_per_split> <min_node_size> <max_depth>
//   features <d>
//   plan <n> <B> <seed> <generated 0|1>
//   [row <len> <u...> <tree_seed>]   x B, only when generated == 0
//   tree <node_count>                x B, each followed by node lines:
//   <feature> <threshold> <left> <right> <value>
// Doubles are printed with %a.

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw DataError("forest file: unexpected end of input");
    return w;
  }
  void expect(std::string_view keyword) {
    const auto w = word();
    if (w != keyword) {
      throw DataError(fmt::format("forest file: expected '{}', found '{}'", keyword, w));
    }
  }
  std::uint64_t u64() {
    const auto w = word();
    char* end = nullptr;
    const auto v = std::strtoull(w.c_str(), &end, 10);
    if (end == w.c_str() || *end != '\0') throw DataError("forest file: bad integer '" + w + "'");
    return v;
  }
  std::int64_t i64() {
    const auto w = word();
    char* end = nullptr;
    const auto v = std::strtoll(w.c_str(), &end, 10);
    if (end == w.c_str() || *end != '\0') throw DataError("forest file: bad integer '" + w + "'");
    return v;
  }
  double real() {
    const auto w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end == w.c_str() || *end != '\0') throw DataError("forest file: bad number '" + w + "'");
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_forest(const Forest& forest, std::ostream& out) {
  const auto& p = forest.params();
  const auto& plan = forest.plan();
  fmt::print(out, "{} {}\n", kMagic, kVersion);
  fmt::print(out, "params {} {} {} {}\n", forest.size(), p.features_per_split, p.min_node_size,
             p.max_depth);
  fmt::print(out, "features {}\n", forest.features());
  fmt::print(out, "plan {} {} {} {}\n", plan.units(), plan.trees(), plan.seed(),
             plan.generated() ? 1 : 0);
  if (!plan.generated()) {
    for (std::size_t j = 0; j < plan.trees(); ++j) {
      const auto row = plan.row(j);
      fmt::print(out, "row {} {} {}\n", row.size(), fmt::join(row, " "), plan.tree_seed(j));
    }
  }
  for (const auto& tree : forest.trees()) {
    fmt::print(out, "tree {}\n", tree.nodes().size());
    for (const auto& n : tree.nodes()) {
      fmt::print(out, "{} {:a} {} {} {:a}\n", n.feature, n.threshold, n.left, n.right, n.value);
    }
  }
}

Forest load_forest(std::istream& in) {
  Reader r(in);
  r.expect(kMagic);
  const auto version = r.i64();
  if (version != kVersion) {
    throw DataError(fmt::format("forest file: unsupported version {}", version));
  }
  r.expect("params");
  ForestParams params;
  params.trees = r.u64();
  params.features_per_split = r.u64();
  params.min_node_size = r.u64();
  params.max_depth = r.u64();
  r.expect("features");
  const auto features = r.u64();
  r.expect("plan");
  const auto n = r.u64();
  const auto b = r.u64();
  const auto seed = r.u64();
  const bool generated = r.u64() != 0;
  if (b != params.trees) throw DataError("forest file: tree count mismatch");

  std::shared_ptr<const BootstrapPlan> plan;
  if (generated) {
    plan = std::make_shared<const BootstrapPlan>(BootstrapPlan::generate(n, b, seed));
  } else {
    std::vector<std::vector<std::uint32_t>> rows(b);
    std::vector<std::uint64_t> seeds(b);
    for (std::size_t j = 0; j < b; ++j) {
      r.expect("row");
      rows[j].resize(r.u64());
      for (auto& u : rows[j]) u = static_cast<std::uint32_t>(r.u64());
      seeds[j] = r.u64();
    }
    plan = std::make_shared<const BootstrapPlan>(
        BootstrapPlan::from_rows(n, std::move(rows), seed, std::move(seeds)));
  }

  std::vector<RegressionTree> trees;
  trees.reserve(b);
  for (std::size_t j = 0; j < b; ++j) {
    r.expect("tree");
    std::vector<TreeNode> nodes(r.u64());
    for (auto& node : nodes) {
      node.feature = static_cast<std::int32_t>(r.i64());
      node.threshold = r.real();
      node.left = static_cast<std::uint32_t>(r.u64());
      node.right = static_cast<std::uint32_t>(r.u64());
      node.value = r.real();
      if (!node.is_leaf() && (node.feature < 0 || static_cast<std::size_t>(node.feature) >= features ||
                              node.left >= nodes.size() || node.right >= nodes.size())) {
        throw DataError("forest file: corrupt node");
      }
    }
    if (nodes.empty()) throw DataError("forest file: empty tree");
    trees.emplace_back(std::move(nodes));
  }
  return Forest(std::move(trees), std::move(plan), params, features);
}

void save_forest(const Forest& forest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_forest(forest, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

Forest load_forest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_forest(in);
}

}  // namespace circpred
