#include "circpred/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "circpred/baselines.hpp"
#include "circpred/conformal.hpp"
#include "circpred/error.hpp"
#include "circpred/parallel.hpp"
#include "circpred/random.hpp"

namespace circpred {

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::prf: return "prf";
    case Method::projected_normal: return "projected_normal";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "prf") return Method::prf;
  if (name == "projected_normal" || name == "pn") return Method::projected_normal;
  throw ConfigError(fmt::format("unknown method '{}' (expected prf or projected_normal)", name));
}

void ExperimentConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (trees == 0) throw ConfigError("number of trees must be positive");
  if (sizes.test == 0) throw ConfigError("test sample must be nonempty");
  if (data.kind == DatasetSpec::Kind::synthetic) {
    VonMisesParams{Angle(), data.kappa}.validate();
  } else if (data.path.empty()) {
    throw ConfigError("dataset path is required");
  }
  if (method == Method::prf) {
    if (sizes.train + sizes.calib == 0) throw ConfigError("training sample must be nonempty");
    quantile_rank(sizes.train + sizes.calib, alpha);
  } else {
    if (sizes.train == 0) throw ConfigError("training sample must be nonempty");
    quantile_rank(sizes.calib, alpha);
  }
}

double UnitRecord::arc_length() const noexcept {
  return full_circle ? kTwoPi : 2.0 * epsilon;
}

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::span<const UnitRecord> records) {
  if (records.empty()) throw ConfigError("cannot summarize an empty report");
  std::vector<double> lengths;
  lengths.reserve(records.size());
  std::size_t covered = 0;
  for (const auto& r : records) {
    lengths.push_back(r.arc_length());
    covered += r.covered ? 1 : 0;
  }
  std::sort(lengths.begin(), lengths.end());
  Summary s;
  s.n_test = records.size();
  s.median = quantile_type7(lengths, 0.5);
  s.q1 = quantile_type7(lengths, 0.25);
  s.q3 = quantile_type7(lengths, 0.75);
  s.iqr = s.q3 - s.q1;
  s.coverage = static_cast<double>(covered) / static_cast<double>(records.size());
  return s;
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed, std::size_t synthetic_size) {
  switch (spec.kind) {
    case DatasetSpec::Kind::synthetic:
      return generate_synthetic(synthetic_size, spec.kappa, seed);
    case DatasetSpec::Kind::wind:
      return load_wind_csv(spec.path, spec.schema);
    case DatasetSpec::Kind::file:
      return read_dataset_csv(spec.path);
  }
  throw ConfigError("unknown dataset kind");
}

namespace {

std::uint64_t data_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, 2); }
std::uint64_t model_seed(std::uint64_t seed) { return derive_seed(seed, 3); }

UnitRecord make_record(std::size_t unit, const ConformalPrediction& p, Angle y) {
  UnitRecord r;
  r.unit = unit;
  r.yhat = p.center;
  r.epsilon = p.epsilon;
  r.full_circle = p.set.is_full_circle();
  r.y_true = y;
  r.covered = covers(p.set, y);
  return r;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Dataset data = load_dataset(config.data, data_seed(config.seed), config.sizes.total());
  return run_experiment(config, data);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  data.validate();
  const DatasetSplit split = split_dataset(data, config.sizes, split_seed(config.seed));

  ForestParams forest = config.forest;
  forest.trees = config.trees;
  forest.threads = config.threads;

  ExperimentReport report;
  report.config = config;
  report.provenance = data.provenance;
  const Dataset& test = split.test;
  std::vector<ConformalPrediction> predictions(test.size());

  if (config.method == Method::prf) {
    const Dataset train = Dataset::concat(split.train, split.calib);
    OobConformalConfig oc;
    oc.forest = forest;
    oc.seed = model_seed(config.seed);
    oc.averaging = config.averaging;
    const auto model = OobConformalModel::fit(train.x, train.y, oc);
    const auto cal = model.calibration(config.alpha);
    report.rank = cal.rank;
    report.threshold = cal.threshold;
    report.scored_units = model.scored_units();
    report.excluded_units = model.excluded_units();
    report.clamped_sigmas = model.clamped_sigmas();
    predictions = model.predict_batch(test.x, config.alpha, config.threads);
  } else {
    const auto model =
        SplitConformalProjectedNormal::fit(split.train.x, split.train.y, forest, model_seed(config.seed));
    const auto cal = model.calibrate(split.calib.x, split.calib.y, config.alpha);
    report.rank = cal.rank;
    report.threshold = cal.threshold;
    report.scored_units = split.calib.size();
    parallel_for(test.size(), config.threads, [&](std::size_t i) {
      predictions[i] = model.predict_with_threshold(test.x.row(i), cal.threshold);
    });
  }

  report.records.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    report.records.push_back(make_record(test.source_index[i], predictions[i], test.y[i]));
  }
  report.summary = summarize(report.records);
  spdlog::info("{}: median arc {:.3f}, IQR {:.3f}, coverage {:.2f}% over {} test units",
               method_name(config.method), report.summary.median, report.summary.iqr,
               100.0 * report.summary.coverage, report.summary.n_test);
  return report;
}

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
  fmt::print(out, "unit,yhat,epsilon,full_circle,y_true,covered\n");
  for (const auto& r : report.records) {
    fmt::print(out, "{},{:.17g},{:.17g},{},{:.17g},{}\n", r.unit, r.yhat.radians(), r.epsilon,
               r.full_circle ? 1 : 0, r.y_true.radians(), r.covered ? 1 : 0);
  }
}

void write_summary_json(const ExperimentReport& report, std::ostream& out) {
  const auto& c = report.config;
  nlohmann::ordered_json j;
  j["method"] = method_name(c.method);
  j["dataset"] = report.provenance;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["sizes"] = {{"train", c.sizes.train}, {"calib", c.sizes.calib}, {"test", c.sizes.test}};
  j["hyperparams"] = {
      {"trees", c.trees},
      {"features_per_split", c.forest.features_per_split},
      {"min_node_size", c.forest.min_node_size},
      {"max_depth", c.forest.max_depth},
      {"averaging", c.averaging == AngleAveraging::arithmetic ? "arithmetic" : "components"}};
  j["quantile_rule"] = "linear interpolation between order statistics (type 7)";
  j["summary"] = {{"median_arc_length", report.summary.median},
                  {"q1", report.summary.q1},
                  {"q3", report.summary.q3},
                  {"iqr", report.summary.iqr},
                  {"coverage", report.summary.coverage},
                  {"n_test", report.summary.n_test}};
  j["calibration"] = {{"rank", report.rank},
                      {"scored_units", report.scored_units},
                      {"threshold", report.threshold},
                      {"excluded_units", report.excluded_units},
                      {"clamped_sigmas", report.clamped_sigmas}};
  out << j.dump(2) << '\n';
}

void print_report_table(const ExperimentReport& report, std::ostream& out) {
  const auto& s = report.summary;
  fmt::print(out, "method      {}\n", method_name(report.config.method));
  fmt::print(out, "dataset     {}\n", report.provenance);
  fmt::print(out, "alpha       {}\n", report.config.alpha);
  fmt::print(out, "quantiles   type 7 (linear interpolation)\n");
  fmt::print(out, "{:>10} {:>10} {:>10} {:>10}\n", "median", "IQR", "coverage", "n_test");
  fmt::print(out, "{:>10.2f} {:>10.2f} {:>9.1f}% {:>10}\n", s.median, s.iqr, 100.0 * s.coverage,
             s.n_test);
}

std::vector<HistogramBin> emit_histogram(const Dataset& ds, std::size_t n_bins) {
  return circular_histogram(ds.y, n_bins);
}

void write_histogram_csv(std::span<const HistogramBin> bins, std::ostream& out) {
  fmt::print(out, "bin_lower,bin_upper,count\n");
  const double width = bins.empty() ? 0.0 : kTwoPi / static_cast<double>(bins.size());
  for (const auto& b : bins) {
    fmt::print(out, "{:.17g},{:.17g},{}\n", b.lower_edge, b.lower_edge + width, b.count);
  }
}

}  // namespace circpred
