#pragma once

#include <tfsir/data.hpp>
#include <tfsir/error.hpp>
#include <tfsir/likelihood.hpp>
#include <tfsir/math.hpp>
#include <tfsir/priors.hpp>
#include <tfsir/random.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace tfsir {

enum class InitMode { from_data, from_prior, fixed };

inline std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::from_data: return "from-data";
    case InitMode::from_prior: return "from-prior";
    case InitMode::fixed: return "fixed";
  }
  return "?";
}

struct McmcConfig {
  std::size_t iterations = 50000;
  std::size_t thin = 10;
  // Thinned samples discarded from the start of the chain.
  std::size_t burn_in = 3000;
  std::uint64_t seed = 1;
  // Last sweep with step-size adaptation; defaults to burn_in * thin.
  std::optional<std::size_t> adapt_until;
  double target_accept = 0.44;
  double initial_step = 0.01;
  InitMode init = InitMode::from_data;
  std::optional<RatePath> init_path;
  int mean_lag = 1;
  // 1 for the posterior; 0 targets the prior alone. With weight 0 the
  // nonnegativity filter is also off, since it belongs to the likelihood.
  double likelihood_weight = 1.0;

  std::size_t adaptation_end() const { return adapt_until.value_or(burn_in * thin); }
  std::size_t kept() const { return iterations / thin - burn_in; }

  void validate() const {
    if (thin < 1) throw ConfigError("mcmc: thin must be >= 1");
    if (iterations < thin) throw ConfigError("mcmc: iterations must be >= thin");
    if (burn_in >= iterations / thin)
      throw ConfigError("mcmc: burn-in (" + std::to_string(burn_in) +
                        ") must be smaller than iterations / thin (" +
                        std::to_string(iterations / thin) + ")");
    if (adaptation_end() > burn_in * thin)
      throw ConfigError("mcmc: adapt_until must not exceed burn_in * thin");
    if (!(target_accept > 0.0 && target_accept < 1.0))
      throw ConfigError("mcmc: target acceptance must lie in (0, 1)");
    if (!(initial_step > 0.0)) throw ConfigError("mcmc: initial step must be positive");
    if (mean_lag != 0 && mean_lag != 1) throw ConfigError("mcmc: mean lag must be 0 or 1");
    if (likelihood_weight != 0.0 && likelihood_weight != 1.0)
      throw ConfigError("mcmc: likelihood weight must be 0 or 1");
    if (init == InitMode::fixed && !init_path)
      throw ConfigError("mcmc: fixed init requires an initial path");
  }
};

struct Provenance {
  std::uint64_t seed = 0;
  McmcConfig config;
  PriorSpec prior;
  std::string prior_digest;
  std::size_t chain = 0;
  std::vector<std::string> warnings;
};

// Kept draws, row-major (sample x day).
struct PosteriorDraws {
  std::size_t days = 0;
  std::size_t samples = 0;
  std::vector<double> beta;
  std::vector<double> gamma;
  // Local scales (or spike-slab indicators) per kept sample, same layout.
  std::vector<double> lambda;
  std::vector<double> eta;
  std::vector<double> sigma2_beta;
  std::vector<double> sigma2_gamma;
  // Per-site acceptance rates over the post-adaptation sweeps.
  std::vector<double> accept_beta;
  std::vector<double> accept_gamma;
  // Proposal scales when adaptation stopped and at the final sweep.
  std::vector<double> step_beta_adapted;
  std::vector<double> step_gamma_adapted;
  std::vector<double> step_beta_final;
  std::vector<double> step_gamma_final;
  Provenance provenance;

  double beta_at(std::size_t row, std::size_t t) const { return beta[row * days + t]; }
  double gamma_at(std::size_t row, std::size_t t) const { return gamma[row * days + t]; }
  double value(Param p, std::size_t row, std::size_t t) const {
    return p == Param::beta ? beta_at(row, t) : gamma_at(row, t);
  }
  double local_at(Param p, std::size_t row, std::size_t t) const {
    return (p == Param::beta ? lambda : eta)[row * days + t];
  }

  // Draws of parameter p on day t across kept samples.
  std::vector<double> column(Param p, std::size_t t) const {
    std::vector<double> out(samples);
    for (std::size_t k = 0; k < samples; ++k) out[k] = value(p, k, t);
    return out;
  }

  std::vector<double> mean_path(Param p) const {
    std::vector<double> out(days, 0.0);
    for (std::size_t k = 0; k < samples; ++k)
      for (std::size_t t = 0; t < days; ++t) out[t] += value(p, k, t);
    for (double& v : out) v /= static_cast<double>(samples);
    return out;
  }
};

// Method-of-moments starting path: beta(t) = dM(t) N / (S I), gamma(t) =
// dR(t) / I at the lagged day, each clamped to [1e-6, 10] and smoothed with
// the 3-point filter. Day 0 has no likelihood term and copies day 1.
inline RatePath init_from_data(const CompartmentSeries& series, const IncrementSeries& increments,
                               int mean_lag = 1) {
  const std::size_t t_len = series.size();
  if (increments.size() != t_len) throw ShapeError("init_from_data: length mismatch");
  if (t_len < 2) throw ShapeError("init_from_data: need T >= 2");
  static constexpr double lo = 1e-6, hi = 10.0;
  auto guard = [](double num, double den) {
    if (!(den > 0.0)) return lo;
    return std::clamp(num / den, lo, hi);
  };
  RatePath raw{std::vector<double>(t_len), std::vector<double>(t_len)};
  for (std::size_t t = 1; t < t_len; ++t) {
    const std::size_t at = t - static_cast<std::size_t>(mean_lag);
    raw.beta[t] = guard(increments.dm[t] * series.n, series.s[at] * series.i[at]);
    raw.gamma[t] = guard(increments.dr[t], series.i[at]);
  }
  raw.beta[0] = raw.beta[1];
  raw.gamma[0] = raw.gamma[1];
  if (t_len < 3) return raw;
  auto smooth = [t_len](const std::vector<double>& x) {
    std::vector<double> y(t_len);
    y.front() = (x[0] + x[1]) / 2.0;
    y.back() = (x[t_len - 2] + x[t_len - 1]) / 2.0;
    for (std::size_t t = 1; t + 1 < t_len; ++t) y[t] = (x[t - 1] + x[t] + x[t + 1]) / 3.0;
    return y;
  };
  return {smooth(raw.beta), smooth(raw.gamma)};
}

namespace detail {

class Chain {
 public:
  Chain(const CompartmentSeries& series, const PriorSpec& spec, const McmcConfig& config,
        std::uint64_t seed, std::size_t chain_index)
      : spec_(spec), config_(config), rng_(seed) {
    spec_.validate();
    config_.validate();
    if (series.size() < 3) throw ShapeError("fit: need T >= 3");
    series.validate(1.0 + 1e-9 * series.n);
    const IncrementSeries increments = to_increments(series);
    model_ = ObservationModel(series, increments, config_.mean_lag);
    t_len_ = series.size();

    out_.provenance = {seed, config_, spec_, spec_.digest(), chain_index, {}};
    if (increments.clamped > 0)
      warn(std::to_string(increments.clamped) + " negative increments clamped to 0");
    initialise(series, increments);
  }

  PosteriorDraws run() {
    const std::size_t adapt_end = config_.adaptation_end();
    const std::size_t kept = config_.kept();
    out_.days = t_len_;
    out_.samples = kept;
    out_.beta.reserve(kept * t_len_);
    out_.gamma.reserve(kept * t_len_);
    out_.lambda.reserve(kept * t_len_);
    out_.eta.reserve(kept * t_len_);
    std::vector<std::size_t> accepted[2] = {std::vector<std::size_t>(t_len_, 0),
                                            std::vector<std::size_t>(t_len_, 0)};
    std::size_t counted = 0;
    if (adapt_end == 0) snapshot_steps();

    for (std::size_t sweep = 1; sweep <= config_.iterations; ++sweep) {
      const bool adapting = sweep <= adapt_end;
      const double gain = adapting ? std::pow(static_cast<double>(sweep), -0.6) : 0.0;
      const bool counting = sweep > adapt_end || adapt_end >= config_.iterations;
      for (Param p : {Param::beta, Param::gamma}) {
        auto& acc = accepted[p == Param::beta ? 0 : 1];
        for (std::size_t t = 0; t < t_len_; ++t) {
          const bool ok = site_update(p, t, gain);
          if (counting && ok) ++acc[t];
        }
      }
      if (counting) ++counted;
      update_scales_in_place(path_, scales_, spec_, rng_);
      update_global_in_place(path_, scales_, spec_, rng_);
      refresh_variances();

      if (sweep == adapt_end) snapshot_steps();
      if (sweep % config_.thin == 0 && sweep / config_.thin > config_.burn_in) store();
    }
    for (int k = 0; k < 2; ++k) {
      auto& rates = k == 0 ? out_.accept_beta : out_.accept_gamma;
      rates.resize(t_len_);
      for (std::size_t t = 0; t < t_len_; ++t)
        rates[t] = counted ? static_cast<double>(accepted[k][t]) / static_cast<double>(counted) : 0.0;
    }
    out_.step_beta_final = steps(Param::beta);
    out_.step_gamma_final = steps(Param::gamma);
    return std::move(out_);
  }

 private:
  void warn(std::string message) { out_.provenance.warnings.push_back(std::move(message)); }

  void initialise(const CompartmentSeries& series, const IncrementSeries& increments) {
    InitMode mode = config_.init;
    if (mode == InitMode::from_data) {
      bool any = false;
      for (std::size_t t = 1; t < t_len_; ++t) any = any || increments.dm[t] > 0 || increments.dr[t] > 0;
      if (!any) {
        warn("all increments are zero; initialising from the prior instead of the data");
        mode = InitMode::from_prior;
      }
    }
    switch (mode) {
      case InitMode::from_data: path_ = init_from_data(series, increments, config_.mean_lag); break;
      case InitMode::from_prior: {
        path_ = sample_prior_path(spec_, t_len_, rng_).first;
        if (config_.likelihood_weight > 0.0) {
          for (double& v : path_.beta) v = std::abs(v);
          for (double& v : path_.gamma) v = std::abs(v);
        }
        break;
      }
      case InitMode::fixed:
        path_ = *config_.init_path;
        if (path_.size() != t_len_) throw ConfigError("fit: initial path length does not match data");
        if (config_.likelihood_weight > 0.0) path_.validate();
        break;
    }

    scales_.lambda.assign(t_len_, 1.0);
    scales_.eta.assign(t_len_, 1.0);
    if (spec_.kind == PriorKind::student_t) {
      std::fill(scales_.lambda.begin(), scales_.lambda.end(), spec_.b / (spec_.a + 1.0));
      std::fill(scales_.eta.begin(), scales_.eta.end(), spec_.d / (spec_.c + 1.0));
    }
    if (spec_.kind == PriorKind::horseshoe) {
      scales_.nu.assign(t_len_, 1.0);
      scales_.xi.assign(t_len_, 1.0);
    }
    update_global_in_place(path_, scales_, spec_, rng_);
    update_scales_in_place(path_, scales_, spec_, rng_);
    update_global_in_place(path_, scales_, spec_, rng_);
    refresh_variances();

    for (auto& s : log_step_) s.assign(t_len_, std::log(config_.initial_step));
  }

  void refresh_variances() {
    for (Param p : {Param::beta, Param::gamma}) {
      const int k = p == Param::beta ? 0 : 1;
      const FusionHyper h = spec_.hyper(p);
      const double sigma2 = scales_.sigma2(p);
      auto& v = variance_[k];
      v.resize(t_len_);
      v[0] = sigma2 * h.initial_multiplier;
      const auto& local = scales_.local(p);
      for (std::size_t t = 1; t < t_len_; ++t) v[t] = difference_variance(spec_.kind, local[t], sigma2, h);
    }
  }

  // Random-walk Metropolis on one site. Returns whether the move was accepted.
  bool site_update(Param p, std::size_t t, double gain) {
    const int k = p == Param::beta ? 0 : 1;
    auto& x = p == Param::beta ? path_.beta : path_.gamma;
    const auto& v = variance_[k];
    const double current = x[t];
    const double proposed = current + std::exp(log_step_[k][t]) * rng_.normal();

    double log_ratio = math::kNegInf;
    if (proposed >= 0.0 || config_.likelihood_weight == 0.0) {
      log_ratio = 0.0;
      if (config_.likelihood_weight != 0.0) log_ratio += model_.delta(t, p, current, proposed);
      if (t == 0) {
        log_ratio -= (proposed * proposed - current * current) / (2.0 * v[0]);
      } else {
        const double prev = x[t - 1];
        log_ratio -= ((proposed - prev) * (proposed - prev) - (current - prev) * (current - prev)) /
                     (2.0 * v[t]);
      }
      if (t + 1 < t_len_) {
        const double next = x[t + 1];
        log_ratio -= ((next - proposed) * (next - proposed) - (next - current) * (next - current)) /
                     (2.0 * v[t + 1]);
      }
      if (std::isnan(log_ratio)) log_ratio = math::kNegInf;
    }
    const double accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    const bool accept = log_ratio >= 0.0 || rng_.uniform() < accept_prob;
    if (accept) x[t] = proposed;
    if (gain > 0.0) {
      double& ls = log_step_[k][t];
      ls = std::clamp(ls + gain * (accept_prob - config_.target_accept), kMinLogStep, kMaxLogStep);
    }
    return accept;
  }

  std::vector<double> steps(Param p) const {
    const auto& ls = log_step_[p == Param::beta ? 0 : 1];
    std::vector<double> out(ls.size());
    for (std::size_t t = 0; t < ls.size(); ++t) out[t] = std::exp(ls[t]);
    return out;
  }

  void snapshot_steps() {
    out_.step_beta_adapted = steps(Param::beta);
    out_.step_gamma_adapted = steps(Param::gamma);
  }

  void store() {
    out_.beta.insert(out_.beta.end(), path_.beta.begin(), path_.beta.end());
    out_.gamma.insert(out_.gamma.end(), path_.gamma.begin(), path_.gamma.end());
    out_.lambda.insert(out_.lambda.end(), scales_.lambda.begin(), scales_.lambda.end());
    out_.eta.insert(out_.eta.end(), scales_.eta.begin(), scales_.eta.end());
    out_.sigma2_beta.push_back(scales_.sigma2_beta);
    out_.sigma2_gamma.push_back(scales_.sigma2_gamma);
  }

  static constexpr double kMinLogStep = -27.6;  // ~1e-12
  static constexpr double kMaxLogStep = 2.3;    // ~10

  PriorSpec spec_;
  McmcConfig config_;
  Rng rng_;
  ObservationModel model_;
  std::size_t t_len_ = 0;
  RatePath path_;
  LatentScales scales_;
  std::vector<double> variance_[2];
  std::vector<double> log_step_[2];
  PosteriorDraws out_;
};

}  // namespace detail

// Seed used by chain `index` for base seed `seed`.
inline std::uint64_t chain_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, index);
}

// Metropolis-within-Gibbs fit of the fused SIR model. One sweep updates every
// beta(t), then every gamma(t), by random-walk Metropolis (negative proposals
// rejected), then draws all local scales and both global variances from their
// full conditionals. Step sizes follow a Robbins-Monro recursion on log scale
// with gain sweep^-0.6 until adaptation ends.
inline PosteriorDraws fit(const CompartmentSeries& series, const PriorSpec& spec,
                          const McmcConfig& config) {
  return detail::Chain(series, spec, config, chain_seed(config.seed, 0), 0).run();
}

// Independent chains with seeds chain_seed(config.seed, c). Results are
// ordered by chain index whatever the worker count.
inline std::vector<PosteriorDraws> run_chains(const CompartmentSeries& series, const PriorSpec& spec,
                                              const McmcConfig& config, std::size_t n_chains,
                                              std::size_t jobs = 1) {
  if (n_chains < 1) throw ConfigError("run_chains: need at least one chain");
  spec.validate();
  config.validate();
  std::vector<std::optional<PosteriorDraws>> results(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c; (c = next++) < n_chains;) {
      try {
        results[c] = detail::Chain(series, spec, config, chain_seed(config.seed, c), c).run();
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, n_chains);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<PosteriorDraws> out;
  out.reserve(n_chains);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace tfsir
