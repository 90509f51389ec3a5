#pragma once

#include <tfsir/data.hpp>
#include <tfsir/error.hpp>
#include <tfsir/math.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace tfsir {

// Latent beta(t), gamma(t), one entry per day.
struct RatePath {
  std::vector<double> beta;
  std::vector<double> gamma;

  std::size_t size() const noexcept { return beta.size(); }

  void validate() const {
    if (beta.size() != gamma.size()) throw ShapeError("rate path: beta and gamma lengths differ");
    for (std::size_t t = 0; t < beta.size(); ++t)
      if (!(beta[t] >= 0.0) || !(gamma[t] >= 0.0))
        throw DomainError("rate path: negative or NaN rate on day " + std::to_string(t + 1));
  }
};

enum class Param { beta, gamma };

inline const char* to_string(Param p) { return p == Param::beta ? "beta" : "gamma"; }

// Poisson observation model with everything that does not depend on the rate
// path precomputed. Day 0 carries no likelihood term; for day t >= 1
//   dM(t) ~ Poisson(beta(t) * S(t-lag) I(t-lag) / N)
//   dR(t) ~ Poisson(gamma(t) * I(t-lag))
// Increments are rounded to the nearest integer here, once.
class ObservationModel {
 public:
  ObservationModel() = default;

  ObservationModel(const CompartmentSeries& series, const IncrementSeries& increments, int mean_lag)
      : mean_lag_(mean_lag) {
    const std::size_t t_len = series.size();
    if (series.s.size() != t_len || series.r.size() != t_len || increments.dm.size() != t_len ||
        increments.dr.size() != t_len)
      throw ShapeError("likelihood: series and increments lengths differ");
    if (mean_lag != 0 && mean_lag != 1) throw ConfigError("likelihood: mean lag must be 0 or 1");
    if (!(series.n > 0)) throw DomainError("likelihood: population must be positive");
    count_[0].resize(t_len);
    count_[1].resize(t_len);
    exposure_[0].resize(t_len);
    exposure_[1].resize(t_len);
    log_fact_[0].resize(t_len);
    log_fact_[1].resize(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
      count_[0][t] = static_cast<double>(std::llround(increments.dm[t]));
      count_[1][t] = static_cast<double>(std::llround(increments.dr[t]));
      if (count_[0][t] < 0 || count_[1][t] < 0)
        throw DomainError("likelihood: negative increment on day " + std::to_string(t + 1));
      log_fact_[0][t] = math::log_factorial(count_[0][t]);
      log_fact_[1][t] = math::log_factorial(count_[1][t]);
      if (t == 0) continue;
      const std::size_t at = t - static_cast<std::size_t>(mean_lag);
      exposure_[0][t] = series.s[at] * series.i[at] / series.n;
      exposure_[1][t] = series.i[at];
    }
  }

  std::size_t size() const noexcept { return count_[0].size(); }
  int mean_lag() const noexcept { return mean_lag_; }

  double count(std::size_t t, Param p) const { return count_[idx(p)][t]; }
  // Multiplier of the rate in the Poisson mean.
  double exposure(std::size_t t, Param p) const { return exposure_[idx(p)][t]; }

  // Log-likelihood contribution of one day and one parameter.
  double term(std::size_t t, Param p, double rate) const {
    if (t == 0) return 0.0;
    const int k = idx(p);
    const double mean = rate * exposure_[k][t];
    const double c = count_[k][t];
    if (mean <= 0.0) return c == 0.0 ? 0.0 : math::kNegInf;
    return c * std::log(mean) - mean - log_fact_[k][t];
  }

  // term(t, p, proposed) - term(t, p, current), computed without the
  // rate-independent parts.
  double delta(std::size_t t, Param p, double current, double proposed) const {
    if (t == 0 || current == proposed) return 0.0;
    const int k = idx(p);
    const double x = exposure_[k][t];
    const double c = count_[k][t];
    if (current * x <= 0.0 || proposed * x <= 0.0)
      return term(t, p, proposed) - term(t, p, current);
    return c * std::log(proposed / current) - (proposed - current) * x;
  }

  double loglik(const RatePath& path) const {
    if (path.beta.size() != size() || path.gamma.size() != size())
      throw ShapeError("likelihood: rate path length " + std::to_string(path.size()) +
                       " does not match data length " + std::to_string(size()));
    double total = 0.0;
    for (std::size_t t = 1; t < size(); ++t) {
      if (path.beta[t] < 0.0 || path.gamma[t] < 0.0)
        throw DomainError("likelihood: negative rate on day " + std::to_string(t + 1));
      total += term(t, Param::beta, path.beta[t]) + term(t, Param::gamma, path.gamma[t]);
    }
    return total;
  }

 private:
  static int idx(Param p) noexcept { return p == Param::beta ? 0 : 1; }

  int mean_lag_ = 1;
  std::vector<double> count_[2];
  std::vector<double> exposure_[2];
  std::vector<double> log_fact_[2];
};

inline double loglik(const RatePath& path, const CompartmentSeries& series,
                     const IncrementSeries& increments, int mean_lag = 1) {
  return ObservationModel(series, increments, mean_lag).loglik(path);
}

// loglik with path.<which>[t] replaced by new_value, minus loglik(path).
// `t` is a 0-based day index with 1 <= t < T.
inline double loglik_term_delta(const RatePath& path, const CompartmentSeries& series,
                                const IncrementSeries& increments, std::size_t t, Param which,
                                double new_value, int mean_lag = 1) {
  const ObservationModel model(series, increments, mean_lag);
  if (path.beta.size() != model.size() || path.gamma.size() != model.size())
    throw ShapeError("likelihood: rate path length does not match data length");
  if (t < 1 || t >= model.size())
    throw ShapeError("likelihood: day index " + std::to_string(t) + " outside [1, T)");
  if (new_value < 0.0) throw DomainError("likelihood: negative proposed rate");
  const double current = which == Param::beta ? path.beta[t] : path.gamma[t];
  if (current < 0.0) throw DomainError("likelihood: negative current rate");
  return model.delta(t, which, current, new_value);
}

}  // namespace tfsir
