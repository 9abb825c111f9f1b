#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "circpred/circular.hpp"
#include "circpred/data.hpp"
#include "circpred/forest.hpp"
#include "circpred/projection.hpp"

namespace circpred {

enum class Method {
  /// Projected random forests with out-of-bag conformalization.
  prf,
  /// Projected normal regression with split conformal calibration.
  projected_normal,
};

std::string_view method_name(Method m) noexcept;
Method parse_method(std::string_view name);

struct DatasetSpec {
  enum class Kind { synthetic, wind, file };

  Kind kind = Kind::synthetic;
  double kappa = 5.0;      // synthetic only
  std::string path;        // wind: station CSV; file: dataset CSV
  WindSchema schema = WindSchema::canonical();
};

struct ExperimentConfig {
  DatasetSpec data;
  Method method = Method::prf;
  double alpha = 0.1;
  std::size_t trees = 500;
  std::uint64_t seed = 1;
  SplitSizes sizes{10000, 10000, 10000};
  ForestParams forest;  // `trees` above overrides forest.trees
  AngleAveraging averaging = AngleAveraging::arithmetic;
  std::size_t threads = 0;

  /// Throws ConfigError on invalid or infeasible settings, before any data is
  /// generated or any model is trained.
  void validate() const;
};

struct UnitRecord {
  std::size_t unit = 0;  // row index in the source dataset
  Angle yhat;
  double epsilon = 0.0;  // r̂·σ̂(x); may be >= π for full-circle sets
  bool full_circle = false;
  Angle y_true;
  bool covered = false;

  double arc_length() const noexcept;
};

struct Summary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double coverage = 0.0;
  std::size_t n_test = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<UnitRecord> records;
  Summary summary;
  std::size_t rank = 0;          // k used for the threshold
  std::size_t scored_units = 0;  // n (split) or n' (out-of-bag)
  double threshold = 0.0;        // r̂
  std::size_t excluded_units = 0;
  std::size_t clamped_sigmas = 0;
  std::string provenance;
};

/// Linear-interpolation ("type 7") quantile of an ascending-sorted sample.
double quantile_type7(std::span<const double> sorted, double p);

/// Median and IQR of the arc lengths (type 7) and the covered fraction.
/// Throws ConfigError on empty input.
Summary summarize(std::span<const UnitRecord> records);

/// Loads or generates the dataset a DatasetSpec describes.
Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed, std::size_t synthetic_size);

/// Runs one method end to end. Out-of-bag runs merge the calibration part
/// into the training sample. Deterministic in the configuration, for any
/// thread count.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Same, on an already-built dataset.
ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data);

/// Columns: unit,yhat,epsilon,full_circle,y_true,covered
void write_report_csv(const ExperimentReport& report, std::ostream& out);
void write_summary_json(const ExperimentReport& report, std::ostream& out);
void print_report_table(const ExperimentReport& report, std::ostream& out);

std::vector<HistogramBin> emit_histogram(const Dataset& ds, std::size_t n_bins);
/// Columns: bin_lower,bin_upper,count
void write_histogram_csv(std::span<const HistogramBin> bins, std::ostream& out);

}  // namespace circpred
