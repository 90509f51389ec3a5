#pragma once

#include <tfsir/data.hpp>
#include <tfsir/error.hpp>
#include <tfsir/priors.hpp>
#include <tfsir/sampler.hpp>

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace tfsir {

inline nlohmann::json to_json(const PriorSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"a", spec.a},
          {"b", spec.b},
          {"c", spec.c},
          {"d", spec.d},
          {"a_sigma_beta", spec.a_sigma_beta},
          {"b_sigma_beta", spec.b_sigma_beta},
          {"a_sigma_gamma", spec.a_sigma_gamma},
          {"b_sigma_gamma", spec.b_sigma_gamma},
          {"p", spec.p},
          {"pi", spec.pi},
          {"epsilon", spec.epsilon},
          {"lambda1", spec.lambda1},
          {"eta1", spec.eta1}};
}

inline PriorSpec prior_from_json(const nlohmann::json& j) {
  PriorSpec spec;
  spec.kind = parse_prior_kind(j.at("kind").get<std::string>());
  spec.a = j.at("a");
  spec.b = j.at("b");
  spec.c = j.at("c");
  spec.d = j.at("d");
  spec.a_sigma_beta = j.at("a_sigma_beta");
  spec.b_sigma_beta = j.at("b_sigma_beta");
  spec.a_sigma_gamma = j.at("a_sigma_gamma");
  spec.b_sigma_gamma = j.at("b_sigma_gamma");
  spec.p = j.at("p");
  spec.pi = j.at("pi");
  spec.epsilon = j.at("epsilon");
  spec.lambda1 = j.at("lambda1");
  spec.eta1 = j.at("eta1");
  return spec;
}

inline nlohmann::json to_json(const McmcConfig& c) {
  return {{"iterations", c.iterations},
          {"thin", c.thin},
          {"burn_in", c.burn_in},
          {"seed", c.seed},
          {"adapt_until", c.adaptation_end()},
          {"target_accept", c.target_accept},
          {"initial_step", c.initial_step},
          {"init", to_string(c.init)},
          {"mean_lag", c.mean_lag},
          {"likelihood_weight", c.likelihood_weight}};
}

inline McmcConfig mcmc_from_json(const nlohmann::json& j) {
  McmcConfig c;
  c.iterations = j.at("iterations");
  c.thin = j.at("thin");
  c.burn_in = j.at("burn_in");
  c.seed = j.at("seed");
  c.adapt_until = j.at("adapt_until").get<std::size_t>();
  c.target_accept = j.at("target_accept");
  c.initial_step = j.at("initial_step");
  const std::string init = j.at("init");
  c.init = init == "from-prior" ? InitMode::from_prior : init == "fixed" ? InitMode::fixed : InitMode::from_data;
  c.mean_lag = j.at("mean_lag");
  c.likelihood_weight = j.at("likelihood_weight");
  return c;
}

inline nlohmann::json provenance_json(const PosteriorDraws& d) {
  return {{"seed", d.provenance.seed},
          {"chain", d.provenance.chain},
          {"prior", to_json(d.provenance.prior)},
          {"prior_digest", d.provenance.prior_digest},
          {"mcmc", to_json(d.provenance.config)},
          {"warnings", d.provenance.warnings},
          {"days", d.days},
          {"samples", d.samples},
          {"accept_beta", d.accept_beta},
          {"accept_gamma", d.accept_gamma}};
}

inline void apply_provenance(PosteriorDraws& d, const nlohmann::json& j) {
  d.provenance.seed = j.at("seed");
  d.provenance.chain = j.at("chain");
  d.provenance.prior = prior_from_json(j.at("prior"));
  d.provenance.prior_digest = j.at("prior_digest");
  d.provenance.config = mcmc_from_json(j.at("mcmc"));
  d.provenance.warnings = j.at("warnings").get<std::vector<std::string>>();
  d.accept_beta = j.at("accept_beta").get<std::vector<double>>();
  d.accept_gamma = j.at("accept_gamma").get<std::vector<double>>();
}

// Long format: `sample,param,t,value`. Samples and days are 1-based; the
// global variances use t = 0 and the local scales start at t = 2.
inline void write_draws_csv(std::ostream& out, const PosteriorDraws& d) {
  out << "sample,param,t,value\n";
  for (std::size_t k = 0; k < d.samples; ++k) {
    const std::string sample = std::to_string(k + 1);
    for (std::size_t t = 0; t < d.days; ++t)
      out << sample << ",beta," << t + 1 << ',' << format_number(d.beta_at(k, t)) << '\n';
    for (std::size_t t = 0; t < d.days; ++t)
      out << sample << ",gamma," << t + 1 << ',' << format_number(d.gamma_at(k, t)) << '\n';
    for (std::size_t t = 1; t < d.days; ++t)
      out << sample << ",lambda," << t + 1 << ',' << format_number(d.local_at(Param::beta, k, t)) << '\n';
    for (std::size_t t = 1; t < d.days; ++t)
      out << sample << ",eta," << t + 1 << ',' << format_number(d.local_at(Param::gamma, k, t)) << '\n';
    out << sample << ",sigma2_beta,0," << format_number(d.sigma2_beta[k]) << '\n';
    out << sample << ",sigma2_gamma,0," << format_number(d.sigma2_gamma[k]) << '\n';
  }
}

inline PosteriorDraws read_draws_csv(std::istream& in, const std::string& source = "<draws>") {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "sample,param,t,value")
    throw SchemaError(source + ": expected header 'sample,param,t,value'");
  struct Row {
    std::size_t sample, t;
    int param;
    double value;
  };
  std::vector<Row> rows;
  std::size_t samples = 0, days = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 4) throw SchemaError(source + ": line " + std::to_string(line_no) + ": expected 4 fields");
    const auto sample = detail::parse_number(f[0]);
    const auto t = detail::parse_number(f[2]);
    const auto value = detail::parse_number(f[3]);
    if (!sample || !t || !value || *sample < 1 || *t < 0)
      throw SchemaError(source + ": line " + std::to_string(line_no) + ": bad number");
    int param;
    if (f[1] == "beta") param = 0;
    else if (f[1] == "gamma") param = 1;
    else if (f[1] == "lambda") param = 2;
    else if (f[1] == "eta") param = 3;
    else if (f[1] == "sigma2_beta") param = 4;
    else if (f[1] == "sigma2_gamma") param = 5;
    else throw SchemaError(source + ": line " + std::to_string(line_no) + ": unknown param");
    rows.push_back({static_cast<std::size_t>(*sample), static_cast<std::size_t>(*t), param, *value});
    samples = std::max(samples, rows.back().sample);
    if (param == 0) days = std::max(days, rows.back().t);
  }
  PosteriorDraws d;
  d.days = days;
  d.samples = samples;
  d.beta.assign(samples * days, 0.0);
  d.gamma.assign(samples * days, 0.0);
  d.lambda.assign(samples * days, 0.0);
  d.eta.assign(samples * days, 0.0);
  d.sigma2_beta.assign(samples, 0.0);
  d.sigma2_gamma.assign(samples, 0.0);
  for (const auto& r : rows) {
    const std::size_t k = r.sample - 1;
    if (r.param >= 4) {
      (r.param == 4 ? d.sigma2_beta : d.sigma2_gamma)[k] = r.value;
      continue;
    }
    if (r.t < 1 || r.t > days) throw SchemaError(source + ": day index out of range");
    std::vector<double>* target[] = {&d.beta, &d.gamma, &d.lambda, &d.eta};
    (*target[r.param])[k * days + (r.t - 1)] = r.value;
  }
  return d;
}

namespace detail {

inline constexpr char kDrawsMagic[8] = {'T', 'F', 'S', 'I', 'R', 'D', 'R', 'W'};
inline constexpr std::uint32_t kDrawsVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& source) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw SchemaError(source + ": truncated draws cache");
  return v;
}

inline void put_array(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> get_array(std::istream& in, std::size_t n, const std::string& source) {
  std::vector<double> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
    throw SchemaError(source + ": truncated draws cache");
  return v;
}

}  // namespace detail

// Binary cache: magic, version, JSON provenance header, then the draw
// matrices as little-endian float64.
inline void write_draws_binary(std::ostream& out, const PosteriorDraws& d) {
  static_assert(std::endian::native == std::endian::little, "draws cache assumes little-endian");
  const std::string header = provenance_json(d).dump();
  out.write(detail::kDrawsMagic, sizeof detail::kDrawsMagic);
  detail::put(out, detail::kDrawsVersion);
  detail::put(out, static_cast<std::uint64_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put(out, static_cast<std::uint64_t>(d.days));
  detail::put(out, static_cast<std::uint64_t>(d.samples));
  for (const auto* v : {&d.beta, &d.gamma, &d.lambda, &d.eta, &d.sigma2_beta, &d.sigma2_gamma})
    detail::put_array(out, *v);
}

inline PosteriorDraws read_draws_binary(std::istream& in, const std::string& source = "<cache>") {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, detail::kDrawsMagic, sizeof magic) != 0)
    throw SchemaError(source + ": not a draws cache");
  if (detail::get<std::uint32_t>(in, source) != detail::kDrawsVersion)
    throw SchemaError(source + ": unsupported draws cache version");
  const auto header_len = detail::get<std::uint64_t>(in, source);
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len)))
    throw SchemaError(source + ": truncated draws cache");
  PosteriorDraws d;
  d.days = detail::get<std::uint64_t>(in, source);
  d.samples = detail::get<std::uint64_t>(in, source);
  const std::size_t cells = d.days * d.samples;
  d.beta = detail::get_array(in, cells, source);
  d.gamma = detail::get_array(in, cells, source);
  d.lambda = detail::get_array(in, cells, source);
  d.eta = detail::get_array(in, cells, source);
  d.sigma2_beta = detail::get_array(in, d.samples, source);
  d.sigma2_gamma = detail::get_array(in, d.samples, source);
  try {
    apply_provenance(d, nlohmann::json::parse(header));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(source + ": bad provenance header: " + e.what());
  }
  return d;
}

// Reads either format, chosen by the leading magic bytes.
inline PosteriorDraws load_draws(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[8] = {};
  in.read(magic, sizeof magic);
  const bool binary = in.gcount() == 8 && std::memcmp(magic, detail::kDrawsMagic, 8) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_draws_binary(in, path) : read_draws_csv(in, path);
}

}  // namespace tfsir
