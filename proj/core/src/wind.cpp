#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "circpred/data.hpp"
#include "circpred/error.hpp"

namespace circpred {

WindSchema WindSchema::canonical() { return WindSchema{}; }

WindSchema WindSchema::inmet() {
  WindSchema s;
  s.delimiter = ';';
  s.decimal = ',';
  s.missing_sentinel = -9999.0;
  s.timestamp_column.clear();
  s.date_column = "Data";
  s.hour_column = "Hora UTC";
  s.date_order = DateOrder::ymd;
  s.precipitation = "PRECIPITACAO TOTAL, HORARIO (mm)";
  s.pressure = "PRESSAO ATMOSFERICA AO NIVEL DA ESTACAO, HORARIA (mB)";
  s.temperature = "TEMPERATURA DO AR - BULBO SECO, HORARIA (C)";
  s.dew_point = "TEMPERATURA DO PONTO DE ORVALHO (C)";
  s.humidity = "UMIDADE RELATIVA DO AR, HORARIA (%)";
  s.gust = "VENTO, RAJADA MAXIMA (m/s)";
  s.speed = "VENTO, VELOCIDADE HORARIA (m/s)";
  s.direction = "VENTO, DIRECAO HORARIA (gr) (gr)";
  return s;
}

namespace {

// Header matching key: ASCII letters and digits only, upper-cased, with
// vowels and C removed. Accented letters (non-ASCII in both UTF-8 and
// Latin-1) and their plain spellings therefore give the same key:
// "DIREÇÃO" and "DIRECAO" both map to "DR".
std::string loose_key(std::string_view name) {
  std::string key;
  for (const char ch : name) {
    const auto u = static_cast<unsigned char>(ch);
    if (u >= 128 || !std::isalnum(u)) continue;
    const char up = static_cast<char>(std::toupper(u));
    if (std::string_view("AEIOUC").find(up) == std::string_view::npos) key.push_back(up);
  }
  return key;
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (const char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == delim && !quoted) {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(std::move(field));
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

std::vector<long> digit_groups(std::string_view s) {
  std::vector<long> out;
  std::string cur;
  for (const char ch : s) {
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    } else if (!cur.empty()) {
      out.push_back(std::stol(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::stol(cur));
  return out;
}

std::int64_t hours_since_epoch(long y, long m, long d, long hh, const std::string& where) {
  using namespace std::chrono;
  const year_month_day ymd{year{static_cast<int>(y)}, month{static_cast<unsigned>(m)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh < 0 || hh > 23) throw DataError(where + ": invalid date or hour");
  const auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 24 + hh;
}

struct ColumnMap {
  std::size_t timestamp = 0, date = 0, hour = 0;
  std::size_t precipitation = 0, pressure = 0, temperature = 0, dew_point = 0, humidity = 0,
              gust = 0, speed = 0, direction = 0;
  std::size_t required_width = 0;
};

std::optional<ColumnMap> match_header(const std::vector<std::string>& fields, const WindSchema& s) {
  std::vector<std::string> keys;
  for (const auto& f : fields) keys.push_back(loose_key(f));
  ColumnMap map;
  auto find = [&](const std::string& name, std::size_t& slot) {
    const auto key = loose_key(name);
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      // Older exports annotate some names, e.g. "DATA (YYYY-MM-DD)".
      it = std::find_if(keys.begin(), keys.end(), [&](const std::string& k) { return k.starts_with(key); });
    }
    if (key.empty() || it == keys.end()) return false;
    slot = static_cast<std::size_t>(it - keys.begin());
    map.required_width = std::max(map.required_width, slot + 1);
    return true;
  };
  bool ok = true;
  if (!s.timestamp_column.empty()) {
    ok &= find(s.timestamp_column, map.timestamp);
  } else {
    ok &= find(s.date_column, map.date);
    ok &= find(s.hour_column, map.hour);
  }
  ok &= find(s.precipitation, map.precipitation);
  ok &= find(s.pressure, map.pressure);
  ok &= find(s.temperature, map.temperature);
  ok &= find(s.dew_point, map.dew_point);
  ok &= find(s.humidity, map.humidity);
  ok &= find(s.gust, map.gust);
  ok &= find(s.speed, map.speed);
  ok &= find(s.direction, map.direction);
  if (!ok) return std::nullopt;
  return map;
}

std::optional<double> parse_field(std::string text, const WindSchema& s, const std::string& where) {
  if (text.empty()) return std::nullopt;
  if (s.decimal != '.') std::replace(text.begin(), text.end(), s.decimal, '.');
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    throw DataError(where + ": cannot parse number '" + text + "'");
  }
  if (s.missing_sentinel && v == *s.missing_sentinel) return std::nullopt;
  return v;
}

}  // namespace

std::vector<WindRecord> read_wind_records(std::istream& in, const WindSchema& schema,
                                          const std::string& name) {
  std::vector<WindRecord> records;
  std::optional<ColumnMap> map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_fields(line, schema.delimiter);
    if (!map) {
      map = match_header(fields, schema);  // metadata lines before the header are skipped
      continue;
    }
    const std::string where = fmt::format("{}:{}", name, line_no);
    if (fields.size() < map->required_width) {
      throw DataError(fmt::format("{}: expected at least {} fields, found {}", where,
                                  map->required_width, fields.size()));
    }

    WindRecord r;
    if (!schema.timestamp_column.empty()) {
      const auto g = digit_groups(fields[map->timestamp]);
      if (g.size() < 4) throw DataError(where + ": cannot parse timestamp '" + fields[map->timestamp] + "'");
      if ((g.size() > 4 && g[4] != 0) || (g.size() > 5 && g[5] != 0)) {
        throw DataError(where + ": timestamp is not on the hour");
      }
      r.hour = hours_since_epoch(g[0], g[1], g[2], g[3], where);
    } else {
      const auto d = digit_groups(fields[map->date]);
      if (d.size() != 3) throw DataError(where + ": cannot parse date '" + fields[map->date] + "'");
      const bool dmy = schema.date_order == WindSchema::DateOrder::dmy;
      const long y = dmy ? d[2] : d[0];
      const long day = dmy ? d[0] : d[2];
      const auto& hour_text = fields[map->hour];
      const auto h = digit_groups(hour_text);
      if (h.empty()) throw DataError(where + ": cannot parse hour '" + hour_text + "'");
      long hh = h[0];
      long mm = h.size() > 1 ? h[1] : 0;
      if (h.size() == 1 && h[0] >= 100) {  // "0100 UTC" style
        hh = h[0] / 100;
        mm = h[0] % 100;
      }
      if (mm != 0) throw DataError(where + ": timestamp is not on the hour");
      r.hour = hours_since_epoch(y, d[1], day, hh, where);
    }

    r.precipitation = parse_field(fields[map->precipitation], schema, where);
    r.pressure = parse_field(fields[map->pressure], schema, where);
    r.temperature = parse_field(fields[map->temperature], schema, where);
    r.dew_point = parse_field(fields[map->dew_point], schema, where);
    r.humidity = parse_field(fields[map->humidity], schema, where);
    r.gust = parse_field(fields[map->gust], schema, where);
    r.speed = parse_field(fields[map->speed], schema, where);
    r.direction = parse_field(fields[map->direction], schema, where);
    if (r.direction && !(*r.direction >= 0.0 && *r.direction <= 360.0)) {
      throw DataError(fmt::format("{}: wind direction {} outside [0, 360]", where, *r.direction));
    }

    if (!records.empty() && r.hour <= records.back().hour) {
      throw DataError(where + ": timestamps are not strictly increasing");
    }
    records.push_back(r);
  }
  if (!map) throw DataError(name + ": no header line matching the wind schema");
  return records;
}

Dataset build_wind_dataset(std::span<const WindRecord> records, const std::string& provenance,
                           WindLoadReport* report) {
  WindLoadReport local;
  local.records = records.size();
  std::vector<double> values;
  Dataset ds;
  for (std::size_t t = 0; t < records.size(); ++t) {
    const WindRecord& now = records[t];
    if (t == 0 || records[t - 1].hour != now.hour - 1) {
      ++local.dropped_no_lag;
      continue;
    }
    const WindRecord& prev = records[t - 1];
    if (!now.direction || !prev.complete()) {
      ++local.dropped_missing;
      continue;
    }
    const Angle lag = Angle::from_degrees(*prev.direction);
    values.insert(values.end(), {std::cos(lag.radians()), std::sin(lag.radians()),
                                 *prev.precipitation, *prev.pressure, *prev.temperature,
                                 *prev.dew_point, *prev.humidity, *prev.gust, *prev.speed});
    ds.y.push_back(Angle::from_degrees(*now.direction));
    ds.source_index.push_back(t);
  }
  local.kept = ds.y.size();
  ds.x = Matrix(ds.y.size(), 9, std::move(values));
  ds.feature_names = {"cos_dir_lag1", "sin_dir_lag1", "precipitation_lag1", "pressure_lag1",
                      "temperature_lag1", "dew_point_lag1", "humidity_lag1", "gust_lag1",
                      "speed_lag1"};
  ds.provenance = provenance;
  if (local.dropped_missing + local.dropped_no_lag > 0) {
    spdlog::info("wind data: kept {} of {} hours ({} with missing fields, {} without a previous hour)",
                 local.kept, local.records, local.dropped_missing, local.dropped_no_lag);
  }
  if (report) *report = local;
  return ds;
}

Dataset load_wind_csv(const std::string& path, const WindSchema& schema, WindLoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const auto records = read_wind_records(in, schema, path);
  return build_wind_dataset(records, "wind(" + path + ")", report);
}

std::string format_iso_hour(std::int64_t hour) {
  using namespace std::chrono;
  const auto days = static_cast<int>(hour >= 0 ? hour / 24 : (hour - 23) / 24);
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  const auto hh = hour - static_cast<std::int64_t>(days) * 24;
  return fmt::format("{:04}-{:02}-{:02}T{:02}:00", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hh);
}

void write_canonical_wind_csv(std::span<const WindRecord> records, std::ostream& out) {
  const WindSchema s = WindSchema::canonical();
  fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", s.timestamp_column, s.precipitation, s.pressure,
             s.temperature, s.dew_point, s.humidity, s.gust, s.speed, s.direction);
  auto field = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.17g}", *v) : std::string();
  };
  for (const auto& r : records) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", format_iso_hour(r.hour), field(r.precipitation),
               field(r.pressure), field(r.temperature), field(r.dew_point), field(r.humidity),
               field(r.gust), field(r.speed), field(r.direction));
  }
}

}  // namespace circpred
