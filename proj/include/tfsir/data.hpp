#pragma once

#include <tfsir/error.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tfsir {

using Date = std::chrono::sys_days;

// Daily S(t), I(t), R(t) for a closed population of size n. Counts are stored
// as doubles because smoothing produces fractional values.
struct CompartmentSeries {
  std::vector<Date> dates;
  std::vector<double> s;
  std::vector<double> i;
  std::vector<double> r;
  double n = 0.0;

  std::size_t size() const noexcept { return i.size(); }

  // Throws unless lengths agree, T >= 2, counts are nonnegative and
  // S + I + R = n to within `tolerance` persons.
  void validate(double tolerance = 0.0) const;
};

// Daily increments consumed by the likelihood. dm(0) = M(0), dr(0) = R(0).
struct IncrementSeries {
  std::vector<double> dm;
  std::vector<double> dr;
  // Number of negative differences clamped to zero.
  std::size_t clamped = 0;

  std::size_t size() const noexcept { return dm.size(); }
};

enum class RemovedColumn { recovered, deaths };

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' ||
                        s.front() == '\xEF' || s.front() == '\xBB' || s.front() == '\xBF'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

}  // namespace detail

// Parses YYYY-MM-DD.
inline std::optional<Date> parse_date(std::string_view text) {
  text = detail::trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto ok = [](std::string_view part, auto& v) {
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    return ec == std::errc{} && p == part.data() + part.size();
  };
  if (!ok(text.substr(0, 4), y) || !ok(text.substr(5, 2), m) || !ok(text.substr(8, 2), d))
    return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

inline std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

// Shortest round-trip representation; integers print without a decimal point.
inline std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  if (value == 0.0) return "0";
  char buf[40];
  if (value == std::trunc(value) && std::abs(value) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", value);
    return buf;
  }
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

inline void CompartmentSeries::validate(double tolerance) const {
  const std::size_t t = i.size();
  if (s.size() != t || r.size() != t || dates.size() != t)
    throw ShapeError("compartment series: vectors have unequal lengths");
  if (t < 2) throw ShapeError("compartment series: need at least 2 days, got " + std::to_string(t));
  if (!(n > 0.0)) throw DataIntegrityError("compartment series: population must be positive");
  for (std::size_t k = 0; k < t; ++k) {
    if (s[k] < 0.0 || i[k] < 0.0 || r[k] < 0.0)
      throw DataIntegrityError("compartment series: negative count on day " +
                               std::to_string(k + 1));
    if (std::abs(s[k] + i[k] + r[k] - n) > tolerance)
      throw DataIntegrityError("compartment series: S + I + R != N on day " +
                               std::to_string(k + 1));
  }
  for (std::size_t k = 1; k < t; ++k)
    if (dates[k] - dates[k - 1] != std::chrono::days{1})
      throw GapError("compartment series: dates not contiguous at day " + std::to_string(k + 1));
}

// Reads `date,confirmed[,recovered],deaths[,population]` (any column order).
// I = confirmed - recovered - deaths, R = recovered + deaths, S = N - I - R.
// `population`, when given, overrides the population column.
inline CompartmentSeries read_csv(std::istream& in, std::optional<double> population = {},
                                  const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(source + ": empty input");
  const auto header = detail::split_csv_line(line);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    return std::nullopt;
  };
  const auto c_date = column("date");
  const auto c_confirmed = column("confirmed");
  const auto c_recovered = column("recovered");
  const auto c_deaths = column("deaths");
  const auto c_population = column("population");
  for (auto [col, name] : {std::pair{c_date, "date"}, std::pair{c_confirmed, "confirmed"},
                           std::pair{c_deaths, "deaths"}})
    if (!col) throw SchemaError(source + ": missing required column '" + name + "'");
  if (!c_population && !population)
    throw SchemaError(source + ": no 'population' column and no population supplied");

  CompartmentSeries out;
  std::optional<double> n = population;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = source + ": row " + std::to_string(row);
    auto field = [&](std::optional<std::size_t> col, const char* name) -> double {
      if (*col >= fields.size()) throw SchemaError(where + ": missing field '" + name + "'");
      const auto v = detail::parse_number(fields[*col]);
      if (!v) throw SchemaError(where + ": unparseable " + name + " '" +
                                std::string(fields[*col]) + "'");
      return *v;
    };
    if (*c_date >= fields.size()) throw SchemaError(where + ": missing field 'date'");
    const auto date = parse_date(fields[*c_date]);
    if (!date) throw SchemaError(where + ": bad date '" + std::string(fields[*c_date]) + "'");

    const double confirmed = field(c_confirmed, "confirmed");
    const double deaths = field(c_deaths, "deaths");
    const double recovered = c_recovered ? field(c_recovered, "recovered") : 0.0;
    if (c_population && !population) {
      const double p = field(c_population, "population");
      if (n && *n != p) throw DataIntegrityError(where + ": population changes within file");
      n = p;
    }
    const std::string day = " (" + format_date(*date) + ")";
    if (confirmed < 0 || recovered < 0 || deaths < 0)
      throw DataIntegrityError(where + day + ": negative raw count");
    const double infectious = confirmed - recovered - deaths;
    const double removed = recovered + deaths;
    if (infectious < 0)
      throw DataIntegrityError(where + day + ": derived infectious count is negative (" +
                               format_number(infectious) + ")");
    const double susceptible = *n - infectious - removed;
    if (susceptible < 0)
      throw DataIntegrityError(where + day + ": derived susceptible count is negative (" +
                               format_number(susceptible) + ")");
    if (!out.dates.empty()) {
      const auto step = *date - out.dates.back();
      if (step <= std::chrono::days{0})
        throw GapError(where + day + ": dates not strictly increasing");
      if (step != std::chrono::days{1})
        throw GapError(where + day + ": gap of " + std::to_string(step.count()) +
                       " days after " + format_date(out.dates.back()));
    }
    out.dates.push_back(*date);
    out.s.push_back(susceptible);
    out.i.push_back(infectious);
    out.r.push_back(removed);
  }
  if (!n) throw SchemaError(source + ": no data rows");
  out.n = *n;
  if (out.size() < 2)
    throw ShapeError(source + ": need at least 2 rows, got " + std::to_string(out.size()));
  return out;
}

inline CompartmentSeries load_csv(const std::string& path, std::optional<double> population = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_csv(in, population, path);
}

// Writes the schema read_csv accepts. With RemovedColumn::deaths the removed
// group is reported as deaths and the recovered column is omitted.
inline void write_csv(std::ostream& out, const CompartmentSeries& series,
                      RemovedColumn removed_as = RemovedColumn::recovered) {
  const bool deaths_only = removed_as == RemovedColumn::deaths;
  out << (deaths_only ? "date,confirmed,deaths,population\n"
                      : "date,confirmed,recovered,deaths,population\n");
  const std::string pop = format_number(series.n);
  for (std::size_t t = 0; t < series.size(); ++t) {
    out << format_date(series.dates[t]) << ',' << format_number(series.i[t] + series.r[t]) << ',';
    if (deaths_only)
      out << format_number(series.r[t]);
    else
      out << format_number(series.r[t]) << ",0";
    out << ',' << pop << '\n';
  }
}

// Centered 3-point moving average of I and R; the first and last day use the
// 2-point mean of the available neighbours. S is recomputed as N - I - R.
inline CompartmentSeries moving_average(const CompartmentSeries& series) {
  const std::size_t t_len = series.size();
  if (t_len < 3)
    throw ShapeError("moving_average: need at least 3 days, got " + std::to_string(t_len));
  auto smooth = [t_len](const std::vector<double>& x) {
    std::vector<double> y(t_len);
    y.front() = (x[0] + x[1]) / 2.0;
    y.back() = (x[t_len - 2] + x[t_len - 1]) / 2.0;
    for (std::size_t t = 1; t + 1 < t_len; ++t) y[t] = (x[t - 1] + x[t] + x[t + 1]) / 3.0;
    return y;
  };
  CompartmentSeries out = series;
  out.i = smooth(series.i);
  out.r = smooth(series.r);
  for (std::size_t t = 0; t < t_len; ++t) out.s[t] = out.n - out.i[t] - out.r[t];
  return out;
}

inline IncrementSeries to_increments(const CompartmentSeries& series) {
  const std::size_t t_len = series.size();
  IncrementSeries out;
  out.dm.resize(t_len);
  out.dr.resize(t_len);
  if (t_len == 0) return out;
  out.dm[0] = series.i[0] + series.r[0];
  out.dr[0] = series.r[0];
  for (std::size_t t = 1; t < t_len; ++t) {
    double dm = (series.i[t] + series.r[t]) - (series.i[t - 1] + series.r[t - 1]);
    double dr = series.r[t] - series.r[t - 1];
    if (dm < 0.0) {
      dm = 0.0;
      ++out.clamped;
    }
    if (dr < 0.0) {
      dr = 0.0;
      ++out.clamped;
    }
    out.dm[t] = dm;
    out.dr[t] = dr;
  }
  return out;
}

}  // namespace tfsir
