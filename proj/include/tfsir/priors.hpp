#pragma once

#include <tfsir/data.hpp>
#include <tfsir/error.hpp>
#include <tfsir/likelihood.hpp>
#include <tfsir/math.hpp>
#include <tfsir/random.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tfsir {

// Fusion priors on successive differences d(t) = x(t) - x(t-1), t >= 1, of a
// rate path x in {beta, gamma}, each written as a Gaussian scale mixture:
//
//   student-t:   d(t) | l_t, s2 ~ N(0, l_t s2),        l_t ~ IG(a, b)
//   horseshoe:   d(t) | l_t, s2 ~ N(0, l_t^2 s2),      l_t ~ C+(0, 1)
//                (l_t^2 | n_t ~ IG(1/2, 1/n_t), n_t ~ IG(1/2, 1))
//   spike-slab:  d(t) | l_t, s2 ~ l_t N(0, s2) + (1 - l_t) N(0, eps^2),  l_t ~ Ber(p)
//
// with s2 ~ IG(a_sigma, b_sigma) and x(0) | s2 ~ N(0, s2 * initial_multiplier).
enum class PriorKind { student_t, horseshoe, spike_slab };

inline std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::student_t: return "student-t";
    case PriorKind::horseshoe: return "horseshoe";
    case PriorKind::spike_slab: return "spike-slab";
  }
  return "?";
}

// Short name used in file names and the CLI prior list.
inline std::string short_name(PriorKind kind) {
  switch (kind) {
    case PriorKind::student_t: return "t";
    case PriorKind::horseshoe: return "horseshoe";
    case PriorKind::spike_slab: return "spikeslab";
  }
  return "?";
}

inline PriorKind parse_prior_kind(const std::string& name) {
  if (name == "t" || name == "student-t" || name == "student_t" || name == "studentt")
    return PriorKind::student_t;
  if (name == "horseshoe" || name == "hs") return PriorKind::horseshoe;
  if (name == "spikeslab" || name == "spike-slab" || name == "spike_slab" || name == "ss")
    return PriorKind::spike_slab;
  throw SpecError("unknown prior kind '" + name + "'");
}

// Hyperparameters seen by one of the two rate paths.
struct FusionHyper {
  double local_shape;         // a or c (student-t)
  double local_scale;         // b or d (student-t)
  double global_shape;        // a_sigma
  double global_scale;        // b_sigma
  double inclusion;           // p or pi (spike-slab)
  double spike_variance;      // eps^2 (spike-slab)
  double initial_multiplier;  // lambda_1 or eta_1
};

struct PriorSpec {
  PriorKind kind = PriorKind::student_t;
  double a = 1.0, b = 1.0;  // beta local scales, df = 2a, scale sqrt(b/a)
  double c = 1.0, d = 1.0;  // gamma local scales
  double a_sigma_beta = 0.1, b_sigma_beta = 0.1;
  double a_sigma_gamma = 0.1, b_sigma_gamma = 0.1;
  double p = 0.5, pi = 0.5;  // slab inclusion probabilities
  double epsilon = 1e-4;     // spike standard deviation
  double lambda1 = 100.0, eta1 = 100.0;

  double df_beta() const { return 2.0 * a; }
  double df_gamma() const { return 2.0 * c; }
  double t_scale_beta() const { return std::sqrt(b / a); }
  double t_scale_gamma() const { return std::sqrt(d / c); }

  FusionHyper hyper(Param which) const {
    if (which == Param::beta)
      return {a, b, a_sigma_beta, b_sigma_beta, p, epsilon * epsilon, lambda1};
    return {c, d, a_sigma_gamma, b_sigma_gamma, pi, epsilon * epsilon, eta1};
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw SpecError(std::string("prior: ") + name + " must be positive and finite");
    };
    positive(a_sigma_beta, "a_sigma_beta");
    positive(b_sigma_beta, "b_sigma_beta");
    positive(a_sigma_gamma, "a_sigma_gamma");
    positive(b_sigma_gamma, "b_sigma_gamma");
    positive(lambda1, "lambda1");
    positive(eta1, "eta1");
    if (kind == PriorKind::student_t) {
      positive(a, "a");
      positive(b, "b");
      positive(c, "c");
      positive(d, "d");
    }
    if (kind == PriorKind::spike_slab) {
      if (!(p >= 0.0 && p <= 1.0)) throw SpecError("prior: p must lie in [0, 1]");
      if (!(pi >= 0.0 && pi <= 1.0)) throw SpecError("prior: pi must lie in [0, 1]");
      if (!(epsilon > 0.0 && epsilon <= 1e-2))
        throw SpecError("prior: epsilon must lie in (0, 1e-2]");
    }
  }

  // Flat `key = value` text, one entry per line; `#` starts a comment.
  std::string to_config() const;
  static PriorSpec from_config(std::istream& in);
  static PriorSpec from_config_string(const std::string& text) {
    std::istringstream in(text);
    return from_config(in);
  }

  // FNV-1a over the canonical config text.
  std::string digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_config()) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

inline std::string PriorSpec::to_config() const {
  std::ostringstream out;
  out << "kind = " << to_string(kind) << '\n';
  const std::pair<const char*, double> entries[] = {
      {"a", a},
      {"b", b},
      {"c", c},
      {"d", d},
      {"a_sigma_beta", a_sigma_beta},
      {"b_sigma_beta", b_sigma_beta},
      {"a_sigma_gamma", a_sigma_gamma},
      {"b_sigma_gamma", b_sigma_gamma},
      {"p", p},
      {"pi", pi},
      {"epsilon", epsilon},
      {"lambda1", lambda1},
      {"eta1", eta1},
  };
  for (const auto& [key, value] : entries) out << key << " = " << format_number(value) << '\n';
  return out.str();
}

inline PriorSpec PriorSpec::from_config(std::istream& in) {
  PriorSpec spec;
  std::map<std::string, double*> fields = {
      {"a", &spec.a},
      {"b", &spec.b},
      {"c", &spec.c},
      {"d", &spec.d},
      {"a_sigma_beta", &spec.a_sigma_beta},
      {"b_sigma_beta", &spec.b_sigma_beta},
      {"a_sigma_gamma", &spec.a_sigma_gamma},
      {"b_sigma_gamma", &spec.b_sigma_gamma},
      {"p", &spec.p},
      {"pi", &spec.pi},
      {"epsilon", &spec.epsilon},
      {"lambda1", &spec.lambda1},
      {"eta1", &spec.eta1},
  };
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    std::string key = std::string(detail::trim(line.substr(0, eq)));
    if (key.empty() && eq == std::string::npos) continue;
    if (eq == std::string::npos)
      throw SpecError("prior config line " + std::to_string(line_no) + ": expected key = value");
    const std::string value = std::string(detail::trim(std::string_view(line).substr(eq + 1)));
    if (key == "kind") {
      spec.kind = parse_prior_kind(value);
      continue;
    }
    const auto it = fields.find(key);
    if (it == fields.end())
      throw SpecError("prior config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    const auto number = detail::parse_number(value);
    if (!number)
      throw SpecError("prior config line " + std::to_string(line_no) + ": bad number '" + value + "'");
    *it->second = *number;
  }
  spec.validate();
  return spec;
}

// Latent variables of the prior hierarchy. Per-day vectors have length T and
// slot t pairs with the difference x(t) - x(t-1); slot 0 is unused.
//   student-t:  lambda/eta hold the variance scales l_t
//   horseshoe:  lambda/eta hold the squared local scales l_t^2; nu/xi the
//               auxiliary inverse-gamma variables
//   spike-slab: lambda/eta hold 0/1 inclusion indicators
struct LatentScales {
  std::vector<double> lambda;
  std::vector<double> eta;
  double sigma2_beta = 1.0;
  double sigma2_gamma = 1.0;
  std::vector<double> nu;
  std::vector<double> xi;

  std::vector<double>& local(Param p) { return p == Param::beta ? lambda : eta; }
  const std::vector<double>& local(Param p) const { return p == Param::beta ? lambda : eta; }
  std::vector<double>& aux(Param p) { return p == Param::beta ? nu : xi; }
  const std::vector<double>& aux(Param p) const { return p == Param::beta ? nu : xi; }
  double& sigma2(Param p) { return p == Param::beta ? sigma2_beta : sigma2_gamma; }
  double sigma2(Param p) const { return p == Param::beta ? sigma2_beta : sigma2_gamma; }
};

// Inverse gamma law, density proportional to x^{-shape-1} exp(-scale / x).
struct InverseGamma {
  double shape;
  double scale;

  double log_pdf(double x) const { return math::log_inv_gamma_pdf(x, shape, scale); }
  double sample(Rng& rng) const { return rng.inv_gamma(shape, scale); }
};

inline void check_scales(const LatentScales& scales, const PriorSpec& spec, std::size_t t_len) {
  if (scales.lambda.size() != t_len || scales.eta.size() != t_len)
    throw SpecError("latent scales: local scale vectors must have length T");
  if (!(scales.sigma2_beta > 0.0) || !(scales.sigma2_gamma > 0.0))
    throw SpecError("latent scales: global variances must be positive");
  for (Param p : {Param::beta, Param::gamma}) {
    const auto& local = scales.local(p);
    for (std::size_t t = 1; t < t_len; ++t) {
      if (spec.kind == PriorKind::spike_slab) {
        if (local[t] != 0.0 && local[t] != 1.0)
          throw SpecError("latent scales: spike-slab indicators must be 0 or 1");
      } else if (!(local[t] > 0.0)) {
        throw SpecError("latent scales: local scales must be positive");
      }
    }
  }
  if (spec.kind == PriorKind::horseshoe) {
    if (scales.nu.size() != t_len || scales.xi.size() != t_len)
      throw SpecError("latent scales: horseshoe needs auxiliary vectors of length T");
    for (std::size_t t = 1; t < t_len; ++t)
      if (!(scales.nu[t] > 0.0) || !(scales.xi[t] > 0.0))
        throw SpecError("latent scales: horseshoe auxiliaries must be positive");
  }
}

// Conditional variance of the difference at slot t.
inline double difference_variance(PriorKind kind, double local, double sigma2,
                                  const FusionHyper& h) {
  switch (kind) {
    case PriorKind::student_t:
    case PriorKind::horseshoe: return local * sigma2;
    case PriorKind::spike_slab: return local != 0.0 ? sigma2 : h.spike_variance;
  }
  return sigma2;
}

namespace detail {

inline double log_bernoulli(double indicator, double p) {
  if (indicator != 0.0) return p > 0.0 ? std::log(p) : math::kNegInf;
  return p < 1.0 ? std::log1p(-p) : math::kNegInf;
}

inline double log_prior_one(const std::vector<double>& x, const std::vector<double>& local,
                            const std::vector<double>& aux, double sigma2, PriorKind kind,
                            const FusionHyper& h) {
  double total = math::log_inv_gamma_pdf(sigma2, h.global_shape, h.global_scale);
  total += math::log_normal_pdf(x[0], 0.0, sigma2 * h.initial_multiplier);
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double diff = x[t] - x[t - 1];
    total += math::log_normal_pdf(diff, 0.0, difference_variance(kind, local[t], sigma2, h));
    switch (kind) {
      case PriorKind::student_t:
        total += math::log_inv_gamma_pdf(local[t], h.local_shape, h.local_scale);
        break;
      case PriorKind::horseshoe:
        total += math::log_inv_gamma_pdf(local[t], 0.5, 1.0 / aux[t]) +
                 math::log_inv_gamma_pdf(aux[t], 0.5, 1.0);
        break;
      case PriorKind::spike_slab: total += log_bernoulli(local[t], h.inclusion); break;
    }
  }
  return total;
}

}  // namespace detail

// Joint log density of the rate path and all latent scales under the prior.
inline double log_prior(const RatePath& path, const LatentScales& scales, const PriorSpec& spec) {
  if (path.beta.size() != path.gamma.size()) throw ShapeError("log_prior: path lengths differ");
  check_scales(scales, spec, path.size());
  double total = 0.0;
  for (Param p : {Param::beta, Param::gamma}) {
    const auto& x = p == Param::beta ? path.beta : path.gamma;
    total += detail::log_prior_one(x, scales.local(p), scales.aux(p), scales.sigma2(p), spec.kind,
                                   spec.hyper(p));
  }
  return total;
}

// Full conditional of a continuous local scale given the difference `diff`.
// student-t: l_t | . ~ IG(a + 1/2, b + diff^2 / (2 s2))
// horseshoe: l_t^2 | n_t, . ~ IG(1, 1/n_t + diff^2 / (2 s2))
inline InverseGamma local_scale_conditional(PriorKind kind, double diff, double sigma2, double aux,
                                            const FusionHyper& h) {
  const double data = diff * diff / (2.0 * sigma2);
  if (kind == PriorKind::horseshoe) return {1.0, 1.0 / aux + data};
  if (kind == PriorKind::student_t) return {h.local_shape + 0.5, h.local_scale + data};
  throw SpecError("local_scale_conditional: spike-slab indicators are discrete");
}

// Horseshoe auxiliary: n_t | l_t^2 ~ IG(1, 1 + 1/l_t^2).
inline InverseGamma horseshoe_aux_conditional(double local_squared) {
  return {1.0, 1.0 + 1.0 / local_squared};
}

// P(l_t = 1 | diff, s2) for the spike-slab indicator.
inline double inclusion_probability(double diff, double sigma2, const FusionHyper& h) {
  if (h.inclusion <= 0.0) return 0.0;
  if (h.inclusion >= 1.0) return 1.0;
  const double slab = std::log(h.inclusion) + math::log_normal_pdf(diff, 0.0, sigma2);
  const double spike = std::log1p(-h.inclusion) + math::log_normal_pdf(diff, 0.0, h.spike_variance);
  return math::logistic(slab - spike);
}

// Full conditional of the global variance s2 for one rate path.
inline InverseGamma global_conditional(const std::vector<double>& x, const std::vector<double>& local,
                                       PriorKind kind, const FusionHyper& h) {
  double shape = h.global_shape + 0.5;
  double scale = h.global_scale + x[0] * x[0] / (2.0 * h.initial_multiplier);
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double diff = x[t] - x[t - 1];
    if (kind == PriorKind::spike_slab) {
      if (local[t] == 0.0) continue;
      shape += 0.5;
      scale += diff * diff / 2.0;
    } else {
      shape += 0.5;
      scale += diff * diff / (2.0 * local[t]);
    }
  }
  return {shape, scale};
}

// In-place Gibbs sweep over the local scales of both paths.
inline void update_scales_in_place(const RatePath& path, LatentScales& scales, const PriorSpec& spec,
                                   Rng& rng) {
  for (Param p : {Param::beta, Param::gamma}) {
    const auto& x = p == Param::beta ? path.beta : path.gamma;
    auto& local = scales.local(p);
    auto& aux = scales.aux(p);
    const double sigma2 = scales.sigma2(p);
    const FusionHyper h = spec.hyper(p);
    for (std::size_t t = 1; t < x.size(); ++t) {
      const double diff = x[t] - x[t - 1];
      switch (spec.kind) {
        case PriorKind::student_t:
          local[t] = local_scale_conditional(spec.kind, diff, sigma2, 0.0, h).sample(rng);
          break;
        case PriorKind::horseshoe:
          local[t] = local_scale_conditional(spec.kind, diff, sigma2, aux[t], h).sample(rng);
          aux[t] = horseshoe_aux_conditional(local[t]).sample(rng);
          break;
        case PriorKind::spike_slab:
          local[t] = rng.bernoulli(inclusion_probability(diff, sigma2, h)) ? 1.0 : 0.0;
          break;
      }
    }
  }
}

inline void update_global_in_place(const RatePath& path, LatentScales& scales, const PriorSpec& spec,
                                   Rng& rng) {
  for (Param p : {Param::beta, Param::gamma}) {
    const auto& x = p == Param::beta ? path.beta : path.gamma;
    scales.sigma2(p) = global_conditional(x, scales.local(p), spec.kind, spec.hyper(p)).sample(rng);
  }
}

inline LatentScales gibbs_update_scales(const RatePath& path, LatentScales scales,
                                        const PriorSpec& spec, Rng& rng) {
  check_scales(scales, spec, path.size());
  update_scales_in_place(path, scales, spec, rng);
  return scales;
}

inline LatentScales gibbs_update_global(const RatePath& path, LatentScales scales,
                                        const PriorSpec& spec, Rng& rng) {
  check_scales(scales, spec, path.size());
  update_global_in_place(path, scales, spec, rng);
  return scales;
}

// Draws a local scale (or indicator) and its auxiliary from the prior.
inline std::pair<double, double> sample_local_prior(PriorKind kind, const FusionHyper& h, Rng& rng) {
  switch (kind) {
    case PriorKind::student_t: return {rng.inv_gamma(h.local_shape, h.local_scale), 1.0};
    case PriorKind::horseshoe: {
      const double aux = rng.inv_gamma(0.5, 1.0);
      return {rng.inv_gamma(0.5, 1.0 / aux), aux};
    }
    case PriorKind::spike_slab: return {rng.bernoulli(h.inclusion) ? 1.0 : 0.0, 1.0};
  }
  return {1.0, 1.0};
}

// Ancestral draw of (path, scales) from the prior as written: globals, local
// scales, x(0), differences, then cumulative sums. No positivity truncation.
inline std::pair<RatePath, LatentScales> sample_prior_path(const PriorSpec& spec, std::size_t t_len,
                                                           Rng& rng) {
  if (t_len < 2) throw ShapeError("sample_prior_path: need T >= 2");
  spec.validate();
  RatePath path{std::vector<double>(t_len), std::vector<double>(t_len)};
  LatentScales scales;
  for (Param p : {Param::beta, Param::gamma}) {
    const FusionHyper h = spec.hyper(p);
    auto& x = p == Param::beta ? path.beta : path.gamma;
    auto& local = scales.local(p);
    auto& aux = scales.aux(p);
    local.assign(t_len, 0.0);
    aux.assign(t_len, spec.kind == PriorKind::horseshoe ? 1.0 : 0.0);
    const double sigma2 = rng.inv_gamma(h.global_shape, h.global_scale);
    scales.sigma2(p) = sigma2;
    x[0] = rng.normal(0.0, std::sqrt(sigma2 * h.initial_multiplier));
    for (std::size_t t = 1; t < t_len; ++t) {
      const auto [l, n] = sample_local_prior(spec.kind, h, rng);
      local[t] = l;
      if (spec.kind == PriorKind::horseshoe) aux[t] = n;
      x[t] = x[t - 1] + rng.normal(0.0, std::sqrt(difference_variance(spec.kind, l, sigma2, h)));
    }
  }
  if (spec.kind != PriorKind::horseshoe) {
    scales.nu.clear();
    scales.xi.clear();
  }
  return {std::move(path), std::move(scales)};
}

}  // namespace tfsir
