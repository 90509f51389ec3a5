#pragma once

#include <tfsir/data.hpp>
#include <tfsir/draws_io.hpp>
#include <tfsir/error.hpp>
#include <tfsir/posterior.hpp>
#include <tfsir/priors.hpp>
#include <tfsir/sampler.hpp>
#include <tfsir/simulator.hpp>
#include <tfsir/study.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tfsir::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2 };

namespace detail {

namespace fs = std::filesystem;

struct SimulateArgs {
  int design = 0;
  std::vector<double> beta, gamma;
  std::vector<std::size_t> breakpoints;
  std::optional<double> population, i0;
  double r0 = 0;
  std::optional<std::size_t> horizon;
  std::string start_date = "2020-05-14";
  std::string mode = "poisson";
  std::string removed = "recovered";
  std::uint64_t seed = 1;
  std::string out;
};

struct McmcArgs {
  std::size_t iterations = 50000;
  std::size_t thin = 10;
  std::size_t burn_in = 3000;
  std::uint64_t seed = 1;
  int mean_lag = 1;
  std::string init = "data";
};

struct FitArgs {
  std::string data = "-";
  std::optional<double> population;
  std::string prior = "t";
  std::string prior_config;
  McmcArgs mcmc;
  bool smooth = false;
  std::size_t chains = 1;
  std::size_t jobs = 1;
  double level = 0.95;
  double threshold = 0.5;
  std::string format = "csv";
  std::string out;
};

struct SummarizeArgs {
  std::string draws;
  double level = 0.95;
  double threshold = 0.5;
  std::string what = "summary";
  std::string format = "csv";
  std::string out;
};

struct StudyArgs {
  int design = 1;
  std::vector<std::string> priors{"t", "horseshoe", "spikeslab"};
  std::string prior_config;
  std::size_t replicates = 10;
  std::string out;
  std::uint64_t seed = 1;
  std::string generator = "poisson";
  std::string estimate = "mean";
  std::optional<double> i0;
  McmcArgs mcmc;
  std::size_t jobs = 1;
};

inline void add_mcmc_options(CLI::App& app, McmcArgs& a) {
  app.add_option("--iterations", a.iterations, "MCMC sweeps")->check(CLI::PositiveNumber);
  app.add_option("--thin", a.thin, "keep every k-th sweep")->check(CLI::PositiveNumber);
  app.add_option("--burnin", a.burn_in, "thinned samples discarded from the start");
  app.add_option("--seed", a.seed, "base random seed");
  app.add_option("--mean-lag", a.mean_lag, "state lag in the Poisson means")->check(CLI::IsMember({0, 1}));
  app.add_option("--init", a.init, "chain start: method of moments or a prior draw")
      ->check(CLI::IsMember({"data", "prior"}));
}

inline McmcConfig to_config(const McmcArgs& a) {
  McmcConfig c;
  c.iterations = a.iterations;
  c.thin = a.thin;
  c.burn_in = a.burn_in;
  c.seed = a.seed;
  c.mean_lag = a.mean_lag;
  c.init = a.init == "prior" ? InitMode::from_prior : InitMode::from_data;
  return c;
}

// Accepts every spelling parse_prior_kind understands.
inline CLI::Validator prior_kind_check() {
  return CLI::Validator(
      [](std::string& name) -> std::string {
        try {
          parse_prior_kind(name);
          return {};
        } catch (const SpecError& e) {
          return e.what();
        }
      },
      "PRIOR");
}

inline PriorSpec load_prior(const std::string& config_path, const std::string& kind, bool kind_given) {
  PriorSpec spec;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open prior config '" + config_path + "'");
    spec = PriorSpec::from_config(in);
  }
  if (config_path.empty() || kind_given) spec.kind = parse_prior_kind(kind);
  spec.validate();
  return spec;
}

// Output directory whose files are written as `name.partial` and renamed only
// after every file has been produced.
class Staging {
 public:
  explicit Staging(fs::path dir) : dir_(std::move(dir)) {}
  ~Staging() {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(partial(f), ec);
  }

  std::ofstream open(const std::string& name, bool binary = false) {
    files_.push_back(name);
    std::ofstream out(partial(name), binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw IoError("cannot write '" + partial(name).string() + "'");
    return out;
  }

  void commit() {
    for (const auto& f : files_) fs::rename(partial(f), dir_ / f);
    files_.clear();
  }

 private:
  fs::path partial(const std::string& name) const { return dir_ / (name + ".partial"); }
  fs::path dir_;
  std::vector<std::string> files_;
};

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir + "'");
}

inline nlohmann::json summary_json(const std::vector<SummaryBand>& bands) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& b : bands)
    out.push_back({{"t", b.t + 1},
                   {"param", to_string(b.param)},
                   {"mean", b.mean},
                   {"median", b.median},
                   {"hpd_lo", b.hpd_lo},
                   {"hpd_hi", b.hpd_hi}});
  return out;
}

inline nlohmann::json change_points_json(const std::vector<ChangePoint>& points) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json() : nlohmann::json(v); };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : points)
    out.push_back({{"t", c.t + 1},
                   {"param", to_string(c.param)},
                   {"lo", num(c.lo)},
                   {"hi", num(c.hi)},
                   {"frequency", num(c.frequency)}});
  return out;
}

// Concatenates the kept samples of several chains; provenance is chain 0's.
inline PosteriorDraws pool(const std::vector<PosteriorDraws>& chains) {
  PosteriorDraws out = chains.front();
  for (std::size_t c = 1; c < chains.size(); ++c) {
    const auto& d = chains[c];
    for (auto [dst, src] : {std::pair{&out.beta, &d.beta}, std::pair{&out.gamma, &d.gamma},
                            std::pair{&out.lambda, &d.lambda}, std::pair{&out.eta, &d.eta},
                            std::pair{&out.sigma2_beta, &d.sigma2_beta},
                            std::pair{&out.sigma2_gamma, &d.sigma2_gamma}})
      dst->insert(dst->end(), src->begin(), src->end());
    out.samples += d.samples;
  }
  return out;
}

inline int run_simulate(const SimulateArgs& a, std::ostream& out) {
  RateSchedule schedule;
  SimConfig cfg;
  if (a.design != 0) {
    const StudyDesign d = builtin_design(a.design);
    schedule = d.schedule;
    cfg.n = d.population;
    cfg.i0 = d.i0;
    cfg.horizon = d.horizon;
  }
  if (!a.beta.empty()) {
    schedule.beta_values = a.beta;
    schedule.gamma_values = a.gamma;
    schedule.breakpoints.clear();
    for (std::size_t b : a.breakpoints) {
      if (b < 2) throw ConfigError("simulate: breakpoints are 1-based days >= 2");
      schedule.breakpoints.push_back(b - 1);
    }
  }
  if (a.population) cfg.n = *a.population;
  if (a.horizon) cfg.horizon = *a.horizon;
  if (a.i0) cfg.i0 = *a.i0;
  else if (a.design == 0) cfg.i0 = cfg.n * 1e-4;
  cfg.r0 = a.r0;
  cfg.seed = a.seed;
  cfg.mode = a.mode == "ssa" ? SimMode::ssa : a.mode == "ode" ? SimMode::ode : SimMode::poisson_increment;
  const auto start = parse_date(a.start_date);
  if (!start) throw ConfigError("simulate: bad --start-date '" + a.start_date + "'");
  cfg.start_date = *start;
  schedule.validate();
  cfg.validate();

  const CompartmentSeries series = simulate(schedule, cfg);
  const RemovedColumn removed = a.removed == "deaths" ? RemovedColumn::deaths : RemovedColumn::recovered;
  if (a.out.empty() || a.out == "-") {
    write_csv(out, series, removed);
    return ok;
  }
  std::ostringstream text;
  write_csv(text, series, removed);
  tfsir::detail::write_file_atomic(a.out, text.str());
  return ok;
}

inline int run_fit(const FitArgs& a, bool prior_given, std::istream& in, std::ostream& out, std::ostream& err) {
  const PriorSpec spec = load_prior(a.prior_config, a.prior, prior_given);
  McmcConfig mc = to_config(a.mcmc);
  mc.validate();
  if (!(a.level > 0 && a.level < 1)) throw ConfigError("fit: --level must lie in (0, 1)");

  CompartmentSeries series = a.data == "-" ? read_csv(in, a.population, "<stdin>") : load_csv(a.data, a.population);
  series.validate(a.smooth ? 1.0 : 0.0);
  if (a.smooth) series = moving_average(series);

  const auto chains = run_chains(series, spec, mc, a.chains, a.jobs);
  const PosteriorDraws draws = pool(chains);
  for (const auto& w : draws.provenance.warnings) err << "warning: " << w << '\n';
  const auto bands = summarize(draws, a.level);
  const auto points = change_point_report(draws, a.threshold);

  if (a.out.empty()) {
    if (a.format == "json")
      out << summary_json(bands).dump(2) << '\n';
    else
      write_summary_csv(out, bands);
    return ok;
  }

  ensure_dir(a.out);
  Staging stage(a.out);
  {
    auto f = stage.open("draws.csv");
    write_draws_csv(f, draws);
  }
  {
    auto f = stage.open("draws.bin", true);
    write_draws_binary(f, draws);
  }
  {
    auto f = stage.open("summary.csv");
    write_summary_csv(f, bands);
  }
  {
    auto f = stage.open("changepoints.csv");
    write_change_points_csv(f, points);
  }
  {
    nlohmann::json prov = provenance_json(draws);
    prov["data"] = a.data == "-" ? "<stdin>" : a.data;
    prov["population"] = series.n;
    prov["first_date"] = format_date(series.dates.front());
    prov["smoothed"] = a.smooth;
    prov["chains"] = a.chains;
    prov["level"] = a.level;
    if (chains.size() > 1) {
      double worst = 0.0;
      for (Param p : {Param::beta, Param::gamma})
        for (std::size_t t = 0; t < draws.days; ++t) {
          std::vector<std::vector<double>> cols;
          for (const auto& c : chains) cols.push_back(c.column(p, t));
          const double r = gelman_rubin(cols);
          if (std::isfinite(r)) worst = std::max(worst, r);
        }
      prov["max_rhat"] = worst;
    }
    auto f = stage.open("provenance.json");
    f << prov.dump(2) << '\n';
  }
  stage.commit();
  if (a.format == "json")
    out << summary_json(bands).dump(2) << '\n';
  else
    write_summary_csv(out, bands);
  return ok;
}

inline int run_summarize(const SummarizeArgs& a, std::ostream& out) {
  const PosteriorDraws draws = load_draws(a.draws);
  std::ostringstream text;
  if (a.what == "changepoints") {
    const auto points = change_point_report(draws, a.threshold);
    if (a.format == "json")
      text << change_points_json(points).dump(2) << '\n';
    else
      write_change_points_csv(text, points);
  } else {
    const auto bands = summarize(draws, a.level);
    if (a.format == "json")
      text << summary_json(bands).dump(2) << '\n';
    else
      write_summary_csv(text, bands);
  }
  if (a.out.empty() || a.out == "-")
    out << text.str();
  else
    tfsir::detail::write_file_atomic(a.out, text.str());
  return ok;
}

inline int run_study_command(const StudyArgs& a, std::ostream& out) {
  StudyDesign d = builtin_design(a.design);
  d.replicates = a.replicates;
  d.seed = a.seed;
  d.generator = a.generator == "ssa" ? SimMode::ssa : SimMode::poisson_increment;
  d.estimate = a.estimate == "median" ? PointEstimate::median : PointEstimate::mean;
  if (a.i0) d.i0 = *a.i0;
  d.mcmc = to_config(a.mcmc);
  PriorSpec base;
  if (!a.prior_config.empty()) base = load_prior(a.prior_config, "t", false);
  d.priors.clear();
  for (const auto& name : a.priors) {
    PriorSpec p = base;
    p.kind = parse_prior_kind(name);
    for (const auto& q : d.priors)
      if (q.kind == p.kind) throw ConfigError("study: prior '" + name + "' listed twice");
    d.priors.push_back(p);
  }

  StudyOptions opts;
  opts.jobs = a.jobs;
  const StudyResult r = run_study(d, a.out, opts);
  out << "design " << a.design << ": " << r.computed.size() << " replicate(s) computed, " << r.skipped.size()
      << " resumed\n";
  for (std::size_t k = 0; k < r.priors.size(); ++k) {
    const auto& m = r.metrics[k];
    double mab_b = 0, mab_g = 0;
    for (std::size_t t = 0; t < m.size(); ++t) {
      mab_b += m.beta.mab[t];
      mab_g += m.gamma.mab[t];
    }
    char line[160];
    std::snprintf(line, sizeof line, "  %s: mean MAB beta %.4g, gamma %.4g\n", short_name(r.priors[k].kind).c_str(),
                  mab_b / double(m.size()), mab_g / double(m.size()));
    out << line;
  }
  return ok;
}

}  // namespace detail

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
inline int run(const std::vector<std::string>& args, std::istream& in = std::cin, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"tfsir: time-fused SIR fitting, simulation and replication studies", "tfsir"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  detail::SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "simulate a compartment series and write it as CSV");
  s->add_option("--design", sim.design, "built-in design 1-4 (0 = none; custom rates required)")
      ->check(CLI::Range(0, 4));
  s->add_option("--beta", sim.beta, "transmission rate per piece")->delimiter(',');
  s->add_option("--gamma", sim.gamma, "removal rate per piece")->delimiter(',');
  s->add_option("--breakpoints", sim.breakpoints, "1-based first day of each new piece")->delimiter(',');
  s->add_option("--population", sim.population, "population N (design default or 1e6)");
  s->add_option("--i0", sim.i0, "initial infectious count (default N * 1e-4)");
  s->add_option("--r0", sim.r0, "initial removed count");
  s->add_option("--horizon", sim.horizon, "number of days (design default or 80)");
  s->add_option("--start-date", sim.start_date, "date of day 1");
  s->add_option("--mode", sim.mode, "generator")->check(CLI::IsMember({"poisson", "ssa", "ode"}));
  s->add_option("--removed-column", sim.removed, "report removals as recovered or deaths")
      ->check(CLI::IsMember({"recovered", "deaths"}));
  s->add_option("--seed", sim.seed, "random seed");
  s->add_option("--out", sim.out, "output file (default stdout)");

  detail::FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit the model to a compartment CSV");
  f->add_option("--data", fit.data, "input CSV ('-' reads stdin)");
  f->add_option("--population", fit.population, "population N when the CSV has no population column");
  auto* prior_opt = f->add_option("--prior", fit.prior, "t, horseshoe or spikeslab")->check(detail::prior_kind_check());
  f->add_option("--prior-config", fit.prior_config, "prior hyperparameter file (key = value)");
  detail::add_mcmc_options(*f, fit.mcmc);
  f->add_flag("--smooth,!--no-smooth", fit.smooth, "apply the 3-point moving average first");
  f->add_option("--chains", fit.chains, "independent chains, pooled for the summary")->check(CLI::PositiveNumber);
  f->add_option("--jobs", fit.jobs, "worker threads")->check(CLI::PositiveNumber);
  f->add_option("--level", fit.level, "HPD level");
  f->add_option("--threshold", fit.threshold, "spike-slab inclusion threshold for change points");
  f->add_option("--format", fit.format, "stdout summary format")->check(CLI::IsMember({"csv", "json"}));
  f->add_option("--out", fit.out, "output directory for draws, summary, change points and provenance");

  detail::SummarizeArgs sum;
  auto* m = app.add_subcommand("summarize", "summarize saved draws (CSV or binary cache)");
  m->add_option("--draws", sum.draws, "draws.csv or draws.bin")->required();
  m->add_option("--level", sum.level, "HPD level");
  m->add_option("--threshold", sum.threshold, "spike-slab inclusion threshold");
  m->add_option("--what", sum.what, "report")->check(CLI::IsMember({"summary", "changepoints"}));
  m->add_option("--format", sum.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  m->add_option("--out", sum.out, "output file (default stdout)");

  detail::StudyArgs st;
  auto* y = app.add_subcommand("study", "run or resume a replication study on a built-in design");
  y->add_option("--design", st.design, "built-in design")->check(CLI::Range(1, 4));
  y->add_option("--priors", st.priors, "priors to fit")->delimiter(',')->check(detail::prior_kind_check());
  y->add_option("--prior-config", st.prior_config, "hyperparameter file shared by all priors");
  y->add_option("--replicates", st.replicates, "number of replicates L")->check(CLI::PositiveNumber);
  y->add_option("--out", st.out, "study directory")->required();
  y->add_option("--generator", st.generator, "data generator")->check(CLI::IsMember({"poisson", "ssa"}));
  y->add_option("--estimate", st.estimate, "point estimate")->check(CLI::IsMember({"mean", "median"}));
  y->add_option("--i0", st.i0, "initial infectious count (default N * 1e-4)");
  detail::add_mcmc_options(*y, st.mcmc);
  y->add_option("--jobs", st.jobs, "worker threads")->check(CLI::PositiveNumber);

  std::vector<const char*> argv{"tfsir"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    if (s->parsed()) {
      if (sim.design == 0 && sim.beta.empty()) throw CLI::ValidationError("simulate: give --design or --beta/--gamma");
      if (sim.beta.size() != sim.gamma.size())
        throw CLI::ValidationError("simulate: --beta and --gamma need the same number of pieces");
      if (!sim.beta.empty() && sim.breakpoints.size() + 1 != sim.beta.size())
        throw CLI::ValidationError("simulate: need one fewer --breakpoints than pieces");
    }
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << s->help();
    return usage;
  }

  try {
    if (s->parsed()) return detail::run_simulate(sim, out);
    if (f->parsed()) return detail::run_fit(fit, prior_opt->count() > 0, in, out, err);
    if (m->parsed()) return detail::run_summarize(sum, out);
    if (y->parsed()) return detail::run_study_command(st, out);
  } catch (const tfsir::Error& e) {
    err << "error: " << e.what() << '\n';
    return data;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return data;
  }
  return usage;
}

}  // namespace tfsir::cli
