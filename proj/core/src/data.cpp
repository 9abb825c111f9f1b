#include "circpred/data.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "circpred/error.hpp"
#include "circpred/random.hpp"

namespace circpred {

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = x.select_rows(rows);
  out.y.reserve(rows.size());
  out.source_index.reserve(rows.size());
  for (const auto r : rows) {
    out.y.push_back(y[r]);
    out.source_index.push_back(source_index.empty() ? r : source_index[r]);
  }
  out.feature_names = feature_names;
  out.provenance = provenance;
  return out;
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b) {
  if (a.features() != b.features()) throw ConfigError("cannot concatenate datasets of different width");
  std::vector<double> data = a.x.data();
  data.insert(data.end(), b.x.data().begin(), b.x.data().end());
  Dataset out;
  out.x = Matrix(a.size() + b.size(), a.features(), std::move(data));
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  out.source_index = a.source_index;
  out.source_index.insert(out.source_index.end(), b.source_index.begin(), b.source_index.end());
  out.feature_names = a.feature_names;
  out.provenance = a.provenance;
  return out;
}

void Dataset::validate() const {
  if (x.rows() != y.size()) throw DataError("dataset: predictor rows and responses differ");
  if (!source_index.empty() && source_index.size() != y.size()) {
    throw DataError("dataset: source index length mismatch");
  }
  if (!feature_names.empty() && feature_names.size() != x.cols()) {
    throw DataError("dataset: feature name count does not match predictor width");
  }
  for (const double v : x.data()) {
    if (!std::isfinite(v)) throw DataError("dataset: non-finite predictor value");
  }
  for (const Angle a : y) {
    if (!(a.radians() >= 0.0 && a.radians() < kTwoPi)) throw DataError("dataset: response outside [0, 2pi)");
  }
}

// ---------------------------------------------------------------------------

Angle synthetic_mean(std::span<const double> x) {
  const double x1 = x[0];
  const double x2 = x[1];
  const double x3 = x[2];
  return Angle(2.0 * std::atan(x1 - 2.0 * x2 + x1 * x2 - 2.0 * x3 * x3) + kPi);
}

Dataset generate_synthetic(std::size_t n, double kappa, std::uint64_t seed) {
  VonMisesParams vm{Angle(), kappa};
  vm.validate();
  Engine rng(seed);
  Dataset ds;
  ds.x = Matrix(n, kSyntheticFeatures);
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.x.row(i);
    for (auto& v : row) v = uniform(rng, -1.0, 1.0);
    vm.mean = synthetic_mean(row);
    ds.y[i] = sample_von_mises(vm, rng);
  }
  for (std::size_t k = 0; k < kSyntheticFeatures; ++k) ds.feature_names.push_back(fmt::format("x{}", k + 1));
  ds.source_index.resize(n);
  std::iota(ds.source_index.begin(), ds.source_index.end(), std::size_t{0});
  ds.provenance = fmt::format("synthetic(kappa={},seed={})", kappa, seed);
  return ds;
}

DatasetSplit split_dataset(const Dataset& ds, const SplitSizes& sizes, std::uint64_t seed) {
  if (sizes.total() > ds.size()) {
    throw ConfigError(fmt::format("split sizes {}+{}+{} exceed the {} available rows", sizes.train,
                                  sizes.calib, sizes.test, ds.size()));
  }
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Engine rng(seed);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  }
  const std::span<const std::size_t> all(perm);
  DatasetSplit out;
  out.train = ds.subset(all.subspan(0, sizes.train));
  out.calib = ds.subset(all.subspan(sizes.train, sizes.calib));
  out.test = ds.subset(all.subspan(sizes.train + sizes.calib, sizes.test));
  return out;
}

// ---------------------------------------------------------------------------
// Dataset files:
//   # circpred-dataset 1
//   # provenance: <text>
//   unit,<feature names...>,y
//   <source index>,<values...>,<response radians>

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const std::string& where) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw DataError(where + ": cannot parse number '" + s + "'");
  return v;
}

}  // namespace

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  fmt::print(out, "# circpred-dataset 1\n# provenance: {}\nunit", ds.provenance);
  for (std::size_t k = 0; k < ds.features(); ++k) {
    fmt::print(out, ",{}", k < ds.feature_names.size() ? ds.feature_names[k] : fmt::format("x{}", k + 1));
  }
  fmt::print(out, ",y\n");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    fmt::print(out, "{}", ds.source_index.empty() ? i : ds.source_index[i]);
    for (const double v : ds.x.row(i)) fmt::print(out, ",{:.17g}", v);
    fmt::print(out, ",{:.17g}\n", ds.y[i].radians());
  }
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset_csv(ds, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

Dataset read_dataset_csv(std::istream& in, const std::string& name) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      constexpr std::string_view tag = "# provenance: ";
      if (line.starts_with(tag)) ds.provenance = line.substr(tag.size());
      continue;
    }
    const auto fields = split_line(line, ',');
    const std::string where = fmt::format("{}:{}", name, line_no);
    if (header.empty()) {
      if (fields.size() < 2 || fields.front() != "unit" || fields.back() != "y") {
        throw DataError(where + ": expected header 'unit,<features...>,y'");
      }
      header = fields;
      ds.feature_names.assign(header.begin() + 1, header.end() - 1);
      continue;
    }
    if (fields.size() != header.size()) {
      throw DataError(fmt::format("{}: expected {} fields, found {}", where, header.size(), fields.size()));
    }
    ds.source_index.push_back(static_cast<std::size_t>(parse_real(fields.front(), where)));
    for (std::size_t k = 1; k + 1 < fields.size(); ++k) values.push_back(parse_real(fields[k], where));
    const double y = parse_real(fields.back(), where);
    if (!(y >= 0.0 && y < kTwoPi)) throw DataError(where + ": response outside [0, 2pi)");
    ds.y.emplace_back(y);
  }
  if (header.empty()) throw DataError(name + ": missing header");
  ds.x = Matrix(ds.y.size(), ds.feature_names.size(), std::move(values));
  ds.validate();
  return ds;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_dataset_csv(in, path);
}

}  // namespace circpred
