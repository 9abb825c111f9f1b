// circpred: synthetic data, wind ingestion, conformal experiments and
// histogram data from the command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "circpred/data.hpp"
#include "circpred/error.hpp"
#include "circpred/harness.hpp"

namespace fs = std::filesystem;
using namespace circpred;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDomain = 4;
constexpr int kExitIo = 5;
constexpr int kExitInternal = 70;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return kExitConfig;
    case ErrorCategory::data: return kExitData;
    case ErrorCategory::domain: return kExitDomain;
    case ErrorCategory::io: return kExitIo;
  }
  return kExitInternal;
}

// Relative input paths that do not exist are looked up under CIRCPRED_DATA_DIR.
std::string resolve_input(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
  if (const char* dir = std::getenv("CIRCPRED_DATA_DIR")) {
    const fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

WindSchema parse_schema(const std::string& name) {
  if (name == "canonical") return WindSchema::canonical();
  if (name == "inmet") return WindSchema::inmet();
  throw ConfigError("unknown wind schema '" + name + "' (expected canonical or inmet)");
}

AngleAveraging parse_averaging(const std::string& name) {
  if (name == "arithmetic") return AngleAveraging::arithmetic;
  if (name == "components") return AngleAveraging::components;
  throw ConfigError("unknown averaging '" + name + "' (expected arithmetic or components)");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

struct DataOptions {
  std::string data;
  std::string wind;
  std::string schema = "canonical";
  double kappa = 5.0;
};

DatasetSpec make_spec(const DataOptions& o) {
  if (!o.data.empty() && !o.wind.empty()) throw ConfigError("--data and --wind are mutually exclusive");
  DatasetSpec spec;
  spec.kappa = o.kappa;
  if (!o.wind.empty()) {
    spec.kind = DatasetSpec::Kind::wind;
    spec.path = resolve_input(o.wind);
    spec.schema = parse_schema(o.schema);
  } else if (!o.data.empty()) {
    spec.kind = DatasetSpec::Kind::file;
    spec.path = resolve_input(o.data);
  }
  return spec;
}

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--data", o.data, "dataset CSV written by simulate or wind-prep");
  cmd->add_option("--wind", o.wind, "raw hourly station CSV");
  cmd->add_option("--schema", o.schema, "station CSV schema: canonical or inmet")->capture_default_str();
  cmd->add_option("--kappa", o.kappa, "von Mises concentration for synthetic data")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction arcs for circular responses"};
  app.require_subcommand(1);

  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset");
  double sim_kappa = 5.0;
  std::size_t sim_n = 30000;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  simulate->add_option("--kappa", sim_kappa, "von Mises concentration")->capture_default_str();
  simulate->add_option("-n,--n", sim_n, "number of units")->capture_default_str();
  simulate->add_option("--seed", sim_seed)->capture_default_str();
  simulate->add_option("--out", sim_out, "output dataset CSV")->required();

  // wind-prep
  auto* wind_prep = app.add_subcommand("wind-prep", "ingest a station CSV into a lagged dataset");
  std::string wp_in, wp_schema = "canonical", wp_out, wp_canonical;
  wind_prep->add_option("--wind", wp_in, "raw hourly station CSV")->required();
  wind_prep->add_option("--schema", wp_schema, "canonical or inmet")->capture_default_str();
  wind_prep->add_option("--out", wp_out, "output dataset CSV")->required();
  wind_prep->add_option("--canonical-out", wp_canonical, "also write the parsed hourly series in canonical form");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a method and report arcs and coverage");
  ExperimentConfig cfg;
  DataOptions ex_data;
  std::string method = "prf", averaging = "arithmetic", ex_out, ex_summary;
  add_data_options(experiment, ex_data);
  experiment->add_option("--method", method, "prf or projected_normal")->capture_default_str();
  experiment->add_option("--alpha", cfg.alpha, "nominal miscoverage level")->capture_default_str();
  experiment->add_option("--trees", cfg.trees, "trees per forest")->capture_default_str();
  experiment->add_option("--seed", cfg.seed)->capture_default_str();
  experiment->add_option("--train", cfg.sizes.train)->capture_default_str();
  experiment->add_option("--calib", cfg.sizes.calib)->capture_default_str();
  experiment->add_option("--test", cfg.sizes.test)->capture_default_str();
  experiment->add_option("--threads", cfg.threads, "worker threads (0 = hardware)")->capture_default_str();
  experiment->add_option("--features-per-split", cfg.forest.features_per_split, "0 = ceil(d/3)")
      ->capture_default_str();
  experiment->add_option("--min-node-size", cfg.forest.min_node_size)->capture_default_str();
  experiment->add_option("--max-depth", cfg.forest.max_depth, "0 = unlimited")->capture_default_str();
  experiment->add_option("--averaging", averaging, "arithmetic or components")->capture_default_str();
  experiment->add_option("--out", ex_out, "per-unit CSV report");
  experiment->add_option("--summary", ex_summary, "JSON summary (default: <out>.json)");

  // hist
  auto* hist = app.add_subcommand("hist", "circular histogram of the responses");
  DataOptions h_data;
  std::size_t h_bins = 36, h_n = 10000;
  std::uint64_t h_seed = 1;
  std::string h_out;
  add_data_options(hist, h_data);
  hist->add_option("--bins", h_bins)->capture_default_str();
  hist->add_option("-n,--n", h_n, "units for synthetic data")->capture_default_str();
  hist->add_option("--seed", h_seed)->capture_default_str();
  hist->add_option("--out", h_out, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors share the configuration exit code; --help still exits 0.
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  auto logger = spdlog::stderr_color_mt("circpred");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*simulate) {
      const Dataset ds = generate_synthetic(sim_n, sim_kappa, sim_seed);
      write_dataset_csv(ds, sim_out);
      spdlog::info("wrote {} units to {}", ds.size(), sim_out);
    } else if (*wind_prep) {
      const WindSchema schema = parse_schema(wp_schema);
      const std::string path = resolve_input(wp_in);
      std::ifstream in(path);
      if (!in) throw IoError("cannot open '" + path + "'");
      const auto records = read_wind_records(in, schema, path);
      WindLoadReport report;
      const Dataset ds = build_wind_dataset(records, "wind(" + fs::path(path).filename().string() + ")", &report);
      write_dataset_csv(ds, wp_out);
      if (!wp_canonical.empty()) {
        auto out = open_output(wp_canonical);
        write_canonical_wind_csv(records, out);
      }
      spdlog::info("{} records, {} rows kept, {} dropped (missing), {} dropped (no previous hour)",
                   report.records, report.kept, report.dropped_missing, report.dropped_no_lag);
    } else if (*experiment) {
      cfg.data = make_spec(ex_data);
      cfg.method = parse_method(method);
      cfg.averaging = parse_averaging(averaging);
      const ExperimentReport report = run_experiment(cfg);
      if (!ex_out.empty()) {
        auto out = open_output(ex_out);
        write_report_csv(report, out);
        if (ex_summary.empty()) ex_summary = ex_out + ".json";
      }
      if (!ex_summary.empty()) {
        auto out = open_output(ex_summary);
        write_summary_json(report, out);
      }
      print_report_table(report, std::cout);
    } else if (*hist) {
      const DatasetSpec spec = make_spec(h_data);
      const Dataset ds = load_dataset(spec, h_seed, h_n);
      const auto bins = emit_histogram(ds, h_bins);
      if (h_out.empty()) {
        write_histogram_csv(bins, std::cout);
      } else {
        auto out = open_output(h_out);
        write_histogram_csv(bins, out);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
