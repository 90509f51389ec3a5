#pragma once

#include <tfsir/data.hpp>
#include <tfsir/error.hpp>
#include <tfsir/likelihood.hpp>
#include <tfsir/priors.hpp>
#include <tfsir/sampler.hpp>
#include <tfsir/simulator.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace tfsir {

// Window of the shortest HPD interval in sorted samples: [first, last].
struct HpdWindow {
  std::size_t first;
  std::size_t last;
};

// Number of consecutive order statistics an HPD interval at `level` spans.
inline std::size_t hpd_width(std::size_t n, double level) {
  const double want = std::ceil(level * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(want), 1, n);
}

// Shortest window of hpd_width(n, level) consecutive sorted values; ties go
// to the smallest lower bound.
inline HpdWindow hpd_window(const std::vector<double>& sorted, double level) {
  if (sorted.size() < 10)
    throw ShapeError("hpd_interval: need at least 10 samples, got " + std::to_string(sorted.size()));
  if (!(level > 0.0 && level < 1.0)) throw DomainError("hpd_interval: level must lie in (0, 1)");
  const std::size_t n = sorted.size();
  const std::size_t m = hpd_width(n, level);
  HpdWindow best{0, m - 1};
  double best_width = sorted[m - 1] - sorted[0];
  for (std::size_t i = 1; i + m <= n; ++i) {
    const double width = sorted[i + m - 1] - sorted[i];
    if (width < best_width) {
      best_width = width;
      best = {i, i + m - 1};
    }
  }
  return best;
}

inline std::pair<double, double> hpd_interval(std::vector<double> samples, double level = 0.95) {
  std::sort(samples.begin(), samples.end());
  const HpdWindow w = hpd_window(samples, level);
  return {samples[w.first], samples[w.last]};
}

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct SummaryBand {
  std::size_t t;  // 0-based day
  Param param;
  double mean;
  double median;
  double hpd_lo;
  double hpd_hi;
};

inline std::vector<SummaryBand> summarize(const PosteriorDraws& draws, double level = 0.95) {
  if (draws.samples == 0) throw ShapeError("summarize: no draws");
  std::vector<SummaryBand> out;
  out.reserve(2 * draws.days);
  for (Param p : {Param::beta, Param::gamma}) {
    for (std::size_t t = 0; t < draws.days; ++t) {
      std::vector<double> col = draws.column(p, t);
      const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
      std::sort(col.begin(), col.end());
      const double median = quantile_sorted(col, 0.5);
      const HpdWindow w = hpd_window(col, level);
      out.push_back({t, p, mean, median, col[w.first], col[w.last]});
    }
  }
  return out;
}

enum class PointEstimate { mean, median };

inline RatePath point_estimate(const PosteriorDraws& draws, PointEstimate kind = PointEstimate::mean) {
  if (kind == PointEstimate::mean) return {draws.mean_path(Param::beta), draws.mean_path(Param::gamma)};
  RatePath out{std::vector<double>(draws.days), std::vector<double>(draws.days)};
  for (std::size_t t = 0; t < draws.days; ++t) {
    for (Param p : {Param::beta, Param::gamma}) {
      auto col = draws.column(p, t);
      std::sort(col.begin(), col.end());
      (p == Param::beta ? out.beta : out.gamma)[t] = quantile_sorted(col, 0.5);
    }
  }
  return out;
}

// Per-day replication metrics over L point-estimate paths:
//   mab(t) = mean |x_l(t) - x(t)|,  mse(t) = mean (x_l(t) - x(t))^2,
//   sd(t)  = sum_l (x_l(t) - xbar(t))^2 / (L - 1)   (a variance; NaN when L = 1).
struct MetricSeries {
  struct Series {
    std::vector<double> mab;
    std::vector<double> mse;
    std::vector<double> sd;
  };
  Series beta;
  Series gamma;

  const Series& get(Param p) const { return p == Param::beta ? beta : gamma; }
  std::size_t size() const { return beta.mab.size(); }
};

inline MetricSeries replication_metrics(const std::vector<RatePath>& estimates, const RateSchedule& truth) {
  if (estimates.empty()) throw ShapeError("replication_metrics: no replicates");
  const std::size_t t_len = estimates.front().size();
  for (const auto& e : estimates)
    if (e.beta.size() != t_len || e.gamma.size() != t_len)
      throw ShapeError("replication_metrics: replicate paths differ in length");
  const double l = static_cast<double>(estimates.size());
  MetricSeries out;
  for (Param p : {Param::beta, Param::gamma}) {
    auto& s = p == Param::beta ? out.beta : out.gamma;
    s.mab.assign(t_len, 0.0);
    s.mse.assign(t_len, 0.0);
    s.sd.assign(t_len, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = 0; t < t_len; ++t) {
      const double x = p == Param::beta ? truth.beta(t) : truth.gamma(t);
      double mean = 0.0;
      for (const auto& e : estimates) {
        const double est = p == Param::beta ? e.beta[t] : e.gamma[t];
        s.mab[t] += std::abs(est - x);
        s.mse[t] += (est - x) * (est - x);
        mean += est;
      }
      s.mab[t] /= l;
      s.mse[t] /= l;
      mean /= l;
      if (estimates.size() > 1) {
        double ss = 0.0;
        for (const auto& e : estimates) {
          const double est = p == Param::beta ? e.beta[t] : e.gamma[t];
          ss += (est - mean) * (est - mean);
        }
        s.sd[t] = ss / (l - 1.0);
      }
    }
  }
  return out;
}

struct ChangePoint {
  std::size_t t;  // 0-based day; the change is between t - 1 and t
  Param param;
  // Equal-tailed 95% interval of the difference (continuous priors).
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  // Posterior inclusion frequency (spike-slab).
  double frequency = std::numeric_limits<double>::quiet_NaN();
};

// Days at which the rate path is judged to change. Continuous priors flag t
// when the equal-tailed 95% interval of x(t) - x(t-1) excludes 0; spike-slab
// flags t when the slab inclusion frequency exceeds `threshold`.
inline std::vector<ChangePoint> change_point_report(const PosteriorDraws& draws, double threshold = 0.5) {
  if (draws.samples == 0) throw ShapeError("change_point_report: no draws");
  const bool spike_slab = draws.provenance.prior.kind == PriorKind::spike_slab;
  std::vector<ChangePoint> out;
  std::vector<double> diffs(draws.samples);
  for (Param p : {Param::beta, Param::gamma}) {
    for (std::size_t t = 1; t < draws.days; ++t) {
      if (spike_slab) {
        double freq = 0.0;
        for (std::size_t k = 0; k < draws.samples; ++k) freq += draws.local_at(p, k, t);
        freq /= static_cast<double>(draws.samples);
        if (freq > threshold) {
          ChangePoint cp{t, p};
          cp.frequency = freq;
          out.push_back(cp);
        }
        continue;
      }
      for (std::size_t k = 0; k < draws.samples; ++k)
        diffs[k] = draws.value(p, k, t) - draws.value(p, k, t - 1);
      std::sort(diffs.begin(), diffs.end());
      const double lo = quantile_sorted(diffs, 0.025);
      const double hi = quantile_sorted(diffs, 0.975);
      if (lo > 0.0 || hi < 0.0) {
        ChangePoint cp{t, p};
        cp.lo = lo;
        cp.hi = hi;
        out.push_back(cp);
      }
    }
  }
  return out;
}

// Potential scale reduction factor for m >= 2 chains of equal length n >= 2.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ShapeError("gelman_rubin: need at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 2) throw ShapeError("gelman_rubin: chains too short");
  for (const auto& c : chains)
    if (c.size() != n) throw ShapeError("gelman_rubin: chains differ in length");
  const double m = static_cast<double>(chains.size());
  const double nn = static_cast<double>(n);
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double mu = std::accumulate(c.begin(), c.end(), 0.0) / nn;
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    within += ss / (nn - 1.0);
    means.push_back(mu);
  }
  within /= m;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= nn / (m - 1.0);
  const double var_plus = (nn - 1.0) / nn * within + between / nn;
  return std::sqrt(var_plus / within);
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryBand>& bands) {
  out << "t,param,mean,median,hpd_lo,hpd_hi\n";
  for (const auto& b : bands)
    out << b.t + 1 << ',' << to_string(b.param) << ',' << format_number(b.mean) << ','
        << format_number(b.median) << ',' << format_number(b.hpd_lo) << ',' << format_number(b.hpd_hi)
        << '\n';
}

// `sd` is the across-replicate variance as defined above; `sd_root` is its
// square root.
inline void write_metrics_csv(std::ostream& out, const MetricSeries& metrics) {
  out << "t,param,mab,mse,sd,sd_root\n";
  for (Param p : {Param::beta, Param::gamma}) {
    const auto& s = metrics.get(p);
    for (std::size_t t = 0; t < s.mab.size(); ++t)
      out << t + 1 << ',' << to_string(p) << ',' << format_number(s.mab[t]) << ','
          << format_number(s.mse[t]) << ',' << format_number(s.sd[t]) << ','
          << format_number(std::sqrt(s.sd[t])) << '\n';
  }
}

inline void write_change_points_csv(std::ostream& out, const std::vector<ChangePoint>& points) {
  out << "t,param,lo,hi,frequency\n";
  for (const auto& c : points)
    out << c.t + 1 << ',' << to_string(c.param) << ',' << format_number(c.lo) << ','
        << format_number(c.hi) << ',' << format_number(c.frequency) << '\n';
}

}  // namespace tfsir
