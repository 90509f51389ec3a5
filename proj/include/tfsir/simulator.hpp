#pragma once

#include <tfsir/data.hpp>
#include <tfsir/error.hpp>
#include <tfsir/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace tfsir {

// Piecewise-constant beta(t), gamma(t). `breakpoints` holds the 0-based day
// index at which each new segment starts, so segment k covers days
// [breakpoints[k-1], breakpoints[k]).
struct RateSchedule {
  std::vector<std::size_t> breakpoints;
  std::vector<double> beta_values;
  std::vector<double> gamma_values;

  static RateSchedule constant(double beta, double gamma) { return {{}, {beta}, {gamma}}; }

  // Equal-length pieces over `horizon` days.
  static RateSchedule equal_pieces(std::size_t horizon, std::vector<double> beta,
                                   std::vector<double> gamma) {
    RateSchedule out{{}, std::move(beta), std::move(gamma)};
    const std::size_t pieces = out.beta_values.size();
    for (std::size_t k = 1; k < pieces; ++k) out.breakpoints.push_back(k * horizon / pieces);
    return out;
  }

  std::size_t segment(std::size_t day) const noexcept {
    return static_cast<std::size_t>(
        std::upper_bound(breakpoints.begin(), breakpoints.end(), day) - breakpoints.begin());
  }
  double beta(std::size_t day) const { return beta_values[segment(day)]; }
  double gamma(std::size_t day) const { return gamma_values[segment(day)]; }

  std::vector<double> beta_path(std::size_t horizon) const {
    std::vector<double> out(horizon);
    for (std::size_t t = 0; t < horizon; ++t) out[t] = beta(t);
    return out;
  }
  std::vector<double> gamma_path(std::size_t horizon) const {
    std::vector<double> out(horizon);
    for (std::size_t t = 0; t < horizon; ++t) out[t] = gamma(t);
    return out;
  }

  void validate() const {
    if (beta_values.size() != breakpoints.size() + 1 || gamma_values.size() != breakpoints.size() + 1)
      throw ConfigError("rate schedule: need breakpoints + 1 values for beta and gamma");
    for (std::size_t k = 1; k < breakpoints.size(); ++k)
      if (breakpoints[k] <= breakpoints[k - 1])
        throw ConfigError("rate schedule: breakpoints must be strictly increasing");
    if (!breakpoints.empty() && breakpoints.front() == 0)
      throw ConfigError("rate schedule: first breakpoint must be after day 1");
    for (double v : beta_values)
      if (!(v >= 0.0)) throw ConfigError("rate schedule: beta values must be >= 0");
    for (double v : gamma_values)
      if (!(v >= 0.0)) throw ConfigError("rate schedule: gamma values must be >= 0");
  }
};

enum class SimMode { poisson_increment, ssa, ode };

inline std::string to_string(SimMode mode) {
  switch (mode) {
    case SimMode::poisson_increment: return "poisson";
    case SimMode::ssa: return "ssa";
    case SimMode::ode: return "ode";
  }
  return "?";
}

struct SimConfig {
  double n = 1e6;
  double i0 = 100;
  double r0 = 0;
  std::size_t horizon = 80;
  std::uint64_t seed = 1;
  SimMode mode = SimMode::poisson_increment;
  Date start_date = Date{std::chrono::year{2020} / 5 / 14};
  // RK4 step in days (ode mode only).
  double ode_step = 0.01;

  void validate() const {
    if (!(n > 0)) throw ConfigError("simulation: population must be positive");
    if (i0 < 0 || r0 < 0) throw ConfigError("simulation: initial counts must be >= 0");
    if (i0 + r0 > n) throw ConfigError("simulation: i0 + r0 exceeds population");
    if (horizon < 2) throw ConfigError("simulation: horizon must be >= 2");
    if (!(ode_step > 0 && ode_step <= 1)) throw ConfigError("simulation: ode step must be in (0, 1]");
  }
};

struct SimStats {
  // Poisson draws truncated to the available compartment size.
  std::size_t clamped = 0;
  // Reaction events fired (ssa mode).
  std::size_t events = 0;
};

namespace detail {

inline CompartmentSeries start_series(const SimConfig& config) {
  CompartmentSeries out;
  out.n = config.n;
  out.dates.resize(config.horizon);
  for (std::size_t t = 0; t < config.horizon; ++t)
    out.dates[t] = config.start_date + std::chrono::days{static_cast<int>(t)};
  out.s.assign(config.horizon, 0.0);
  out.i.assign(config.horizon, 0.0);
  out.r.assign(config.horizon, 0.0);
  out.s[0] = config.n - config.i0 - config.r0;
  out.i[0] = config.i0;
  out.r[0] = config.r0;
  return out;
}

}  // namespace detail

// Daily Poisson-increment recursion, using the previous day's state in the
// means:  dM(t) ~ Poisson(beta(t) S(t-1) I(t-1) / N),  dR(t) ~ Poisson(gamma(t) I(t-1)).
// Draws are truncated so that compartments stay nonnegative.
inline CompartmentSeries simulate_poisson(const RateSchedule& schedule, const SimConfig& config,
                                          SimStats* stats = nullptr) {
  schedule.validate();
  config.validate();
  Rng rng(config.seed);
  CompartmentSeries out = detail::start_series(config);
  std::size_t clamped = 0;
  for (std::size_t t = 1; t < config.horizon; ++t) {
    const double s = out.s[t - 1], i = out.i[t - 1], r = out.r[t - 1];
    double dm = static_cast<double>(rng.poisson(schedule.beta(t) * s * i / config.n));
    if (dm > s) {
      dm = s;
      ++clamped;
    }
    double dr = static_cast<double>(rng.poisson(schedule.gamma(t) * i));
    if (dr > i + dm) {
      dr = i + dm;
      ++clamped;
    }
    out.s[t] = s - dm;
    out.i[t] = i + dm - dr;
    out.r[t] = r + dr;
  }
  if (stats) stats->clamped = clamped;
  return out;
}

// Gillespie direct method for S -> I (rate beta S I / N) and I -> R
// (rate gamma I). Rates are held at beta(t), gamma(t) over the day ending at
// t; the state is recorded at integer days.
inline CompartmentSeries simulate_ssa(const RateSchedule& schedule, const SimConfig& config,
                                      SimStats* stats = nullptr) {
  schedule.validate();
  config.validate();
  Rng rng(config.seed);
  CompartmentSeries out = detail::start_series(config);
  double s = out.s[0], i = out.i[0], r = out.r[0];
  std::size_t events = 0;
  for (std::size_t t = 1; t < config.horizon; ++t) {
    const double beta = schedule.beta(t) / config.n;
    const double gamma = schedule.gamma(t);
    double clock = 0.0;
    for (;;) {
      const double infect = beta * s * i;
      const double total = infect + gamma * i;
      if (!(total > 0.0)) break;
      clock += rng.exponential(total);
      if (clock >= 1.0) break;
      if (rng.uniform() * total < infect) {
        s -= 1;
        i += 1;
      } else {
        i -= 1;
        r += 1;
      }
      ++events;
    }
    out.s[t] = s;
    out.i[t] = i;
    out.r[t] = r;
  }
  if (stats) stats->events = events;
  return out;
}

// Fixed-step RK4 integration of the deterministic SIR equations with
// beta(t), gamma(t) held constant over each day.
inline CompartmentSeries solve_ode(const RateSchedule& schedule, const SimConfig& config) {
  schedule.validate();
  config.validate();
  CompartmentSeries out = detail::start_series(config);
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / config.ode_step));
  const double h = 1.0 / static_cast<double>(steps);
  const double n = config.n;
  double s = out.s[0], i = out.i[0], r = out.r[0];
  for (std::size_t t = 1; t < config.horizon; ++t) {
    const double beta = schedule.beta(t);
    const double gamma = schedule.gamma(t);
    auto ds = [&](double s_, double i_) { return -beta * i_ * s_ / n; };
    auto di = [&](double s_, double i_) { return beta * i_ * s_ / n - gamma * i_; };
    auto dr = [&](double i_) { return gamma * i_; };
    for (std::size_t k = 0; k < steps; ++k) {
      const double s1 = ds(s, i), i1 = di(s, i), r1 = dr(i);
      const double s2 = ds(s + 0.5 * h * s1, i + 0.5 * h * i1), i2 = di(s + 0.5 * h * s1, i + 0.5 * h * i1),
                   r2 = dr(i + 0.5 * h * i1);
      const double s3 = ds(s + 0.5 * h * s2, i + 0.5 * h * i2), i3 = di(s + 0.5 * h * s2, i + 0.5 * h * i2),
                   r3 = dr(i + 0.5 * h * i2);
      const double s4 = ds(s + h * s3, i + h * i3), i4 = di(s + h * s3, i + h * i3), r4 = dr(i + h * i3);
      s += h / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4);
      i += h / 6.0 * (i1 + 2 * i2 + 2 * i3 + i4);
      r += h / 6.0 * (r1 + 2 * r2 + 2 * r3 + r4);
    }
    out.s[t] = s;
    out.i[t] = i;
    out.r[t] = r;
  }
  return out;
}

inline CompartmentSeries simulate(const RateSchedule& schedule, const SimConfig& config,
                                  SimStats* stats = nullptr) {
  switch (config.mode) {
    case SimMode::poisson_increment: return simulate_poisson(schedule, config, stats);
    case SimMode::ssa: return simulate_ssa(schedule, config, stats);
    case SimMode::ode: return solve_ode(schedule, config);
  }
  throw ConfigError("simulation: unknown mode");
}

}  // namespace tfsir
