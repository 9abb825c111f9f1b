#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "circpred/circular.hpp"
#include "circpred/matrix.hpp"

namespace circpred {

/// Predictors plus circular responses. `source_index` maps each row back to
/// the dataset it was split from (identity for freshly built datasets).
struct Dataset {
  Matrix x;
  std::vector<Angle> y;
  std::vector<std::string> feature_names;
  std::string provenance;
  std::vector<std::size_t> source_index;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t features() const noexcept { return x.cols(); }

  /// Rows in the given order; source indices are carried through.
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Concatenation of two datasets with the same features.
  static Dataset concat(const Dataset& a, const Dataset& b);

  /// Throws DataError on non-finite predictors, out-of-range responses or
  /// inconsistent sizes.
  void validate() const;
};

// --- synthetic --------------------------------------------------------------

inline constexpr std::size_t kSyntheticFeatures = 10;

/// Conditional mean direction 2·atan(x1 - 2x2 + x1x2 - 2x3²) + π.
Angle synthetic_mean(std::span<const double> x);

/// Ten U[-1, 1] predictors (x4..x10 are pure noise) and a von Mises response
/// around synthetic_mean with concentration kappa. Deterministic in seed.
Dataset generate_synthetic(std::size_t n, double kappa, std::uint64_t seed);

// --- splitting --------------------------------------------------------------

struct SplitSizes {
  std::size_t train = 0;
  std::size_t calib = 0;
  std::size_t test = 0;

  std::size_t total() const noexcept { return train + calib + test; }
};

struct DatasetSplit {
  Dataset train;
  Dataset calib;
  Dataset test;
};

/// Disjoint uniformly random parts of the requested sizes (a seeded shuffle,
/// then consecutive blocks). Throws ConfigError if the sizes exceed n.
DatasetSplit split_dataset(const Dataset& ds, const SplitSizes& sizes, std::uint64_t seed);

// --- structured-text dataset files -----------------------------------------

void write_dataset_csv(const Dataset& ds, std::ostream& out);
void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(std::istream& in, const std::string& name = "<stream>");
Dataset read_dataset_csv(const std::string& path);

// --- wind station records ---------------------------------------------------

/// Column layout of an hourly station export. Column names are matched after
/// dropping everything except ASCII letters and digits and upper-casing, so
/// accents and encodings (UTF-8 or Latin-1) do not matter.
struct WindSchema {
  enum class DateOrder { ymd, dmy };

  char delimiter = ',';
  char decimal = '.';
  /// Numeric value that marks a missing field, in addition to empty fields.
  std::optional<double> missing_sentinel;

  /// ISO-8601 timestamp column; when empty, date_column + hour_column are used.
  std::string timestamp_column = "timestamp";
  std::string date_column;
  std::string hour_column;
  DateOrder date_order = DateOrder::ymd;

  std::string precipitation = "precipitation_mm";
  std::string pressure = "pressure_mb";
  std::string temperature = "temperature_c";
  std::string dew_point = "dew_point_c";
  std::string humidity = "humidity_pct";
  std::string gust = "gust_ms";
  std::string speed = "speed_ms";
  std::string direction = "direction_deg";

  /// Comma-separated, dot decimals, empty = missing, ISO timestamps.
  static WindSchema canonical();
  /// INMET automatic-station historical export: semicolon-separated, comma
  /// decimals, -9999 for missing, separate "Data" and "Hora UTC" columns.
  static WindSchema inmet();
};

/// One hourly observation. Fields are empty when missing.
struct WindRecord {
  std::int64_t hour = 0;  // hours since 1970-01-01T00:00Z
  std::optional<double> precipitation, pressure, temperature, dew_point, humidity, gust, speed,
      direction;  // direction in degrees

  bool complete() const noexcept {
    return precipitation && pressure && temperature && dew_point && humidity && gust && speed &&
           direction;
  }
};

struct WindLoadReport {
  std::size_t records = 0;       // parsed data rows
  std::size_t kept = 0;          // dataset rows produced
  std::size_t dropped_missing = 0;
  std::size_t dropped_no_lag = 0;
};

/// Parses an hourly series. Throws DataError (with line number) on malformed
/// rows and on timestamps that are not strictly increasing.
std::vector<WindRecord> read_wind_records(std::istream& in, const WindSchema& schema,
                                          const std::string& name = "<stream>");

/// Builds the modelling table: response = direction at hour t (radians),
/// predictors = cos/sin of the direction and the seven other variables at
/// hour t - 1. Rows whose previous hour is absent from the series, or whose
/// response or lagged predictors are missing, are dropped and counted.
Dataset build_wind_dataset(std::span<const WindRecord> records, const std::string& provenance,
                           WindLoadReport* report = nullptr);

Dataset load_wind_csv(const std::string& path, const WindSchema& schema = WindSchema::canonical(),
                      WindLoadReport* report = nullptr);

/// Writes records in the canonical schema.
void write_canonical_wind_csv(std::span<const WindRecord> records, std::ostream& out);

std::string format_iso_hour(std::int64_t hour);

}  // namespace circpred
