#pragma once

#include <tfsir/data.hpp>
#include <tfsir/draws_io.hpp>
#include <tfsir/error.hpp>
#include <tfsir/posterior.hpp>
#include <tfsir/priors.hpp>
#include <tfsir/random.hpp>
#include <tfsir/sampler.hpp>
#include <tfsir/simulator.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace tfsir {

struct StudyDesign {
  std::string name;
  RateSchedule schedule;
  double population = 1e6;
  std::size_t horizon = 80;
  double i0 = 100;
  double r0 = 0;
  std::size_t replicates = 10;
  std::vector<PriorSpec> priors;
  McmcConfig mcmc;
  SimMode generator = SimMode::poisson_increment;
  std::uint64_t seed = 1;
  PointEstimate estimate = PointEstimate::mean;

  void validate() const {
    if (replicates < 1) throw ConfigError("study: replicates must be >= 1");
    if (priors.empty()) throw ConfigError("study: at least one prior is required");
    if (generator == SimMode::ode) throw ConfigError("study: generator must be poisson or ssa");
    schedule.validate();
    mcmc.validate();
    for (const auto& p : priors) p.validate();
  }
};

inline std::vector<PriorSpec> all_priors() {
  std::vector<PriorSpec> out(3);
  out[0].kind = PriorKind::student_t;
  out[1].kind = PriorKind::horseshoe;
  out[2].kind = PriorKind::spike_slab;
  return out;
}

// The four simulation designs: 80 days in four 20-day pieces. Initial
// infectious count is N * 1e-4 (100 at N = 1e6, 1000 at N = 1e7).
inline std::vector<StudyDesign> builtin_designs() {
  struct Row {
    const char* name;
    std::vector<double> beta, gamma;
    double n;
  };
  const Row rows[] = {
      {"design1", {0.15, 0.20, 0.10, 0.05}, {0.05, 0.09, 0.10, 0.08}, 1e6},
      {"design2", {0.10, 0.15, 0.10, 0.05}, {0.05, 0.09, 0.10, 0.08}, 1e6},
      {"design3", {0.07, 0.09, 0.08, 0.05}, {0.02, 0.04, 0.06, 0.07}, 1e7},
      {"design4", {0.05, 0.08, 0.05, 0.07}, {0.02, 0.05, 0.04, 0.03}, 1e7},
  };
  std::vector<StudyDesign> out;
  for (const auto& row : rows) {
    StudyDesign d;
    d.name = row.name;
    d.horizon = 80;
    d.schedule = RateSchedule::equal_pieces(d.horizon, row.beta, row.gamma);
    d.population = row.n;
    d.i0 = row.n * 1e-4;
    d.priors = all_priors();
    out.push_back(std::move(d));
  }
  return out;
}

inline StudyDesign builtin_design(int number) {
  if (number < 1 || number > 4) throw ConfigError("study: design must be 1, 2, 3 or 4");
  return builtin_designs()[static_cast<std::size_t>(number - 1)];
}

// Seeds for replicate l (1-based).
inline std::uint64_t replicate_sim_seed(std::uint64_t base, std::size_t l) { return derive_seed(base, 2 * l); }
inline std::uint64_t replicate_fit_seed(std::uint64_t base, std::size_t l) { return derive_seed(base, 2 * l + 1); }

struct StudyOptions {
  std::size_t jobs = 1;
  // Stop after this many newly computed replicates (0 = no limit).
  std::size_t max_new_replicates = 0;
  std::function<void(std::size_t replicate)> on_replicate_done;
};

struct StudyResult {
  std::vector<PriorSpec> priors;
  // estimates[prior][replicate - 1]
  std::vector<std::vector<RatePath>> estimates;
  std::vector<MetricSeries> metrics;
  std::vector<std::size_t> computed;
  std::vector<std::size_t> skipped;
  bool complete = false;
};

namespace detail {

namespace fs = std::filesystem;

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes to `path.partial` and renames into place.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + partial.string() + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + partial.string() + "'");
  }
  fs::rename(partial, path);
}

inline std::string replicate_name(std::size_t l) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03zu.csv", l);
  return buf;
}

inline nlohmann::json study_fingerprint(const StudyDesign& d) {
  nlohmann::json priors = nlohmann::json::array();
  for (const auto& p : d.priors) priors.push_back(to_json(p));
  return {{"name", d.name},
          {"population", d.population},
          {"horizon", d.horizon},
          {"i0", d.i0},
          {"r0", d.r0},
          {"breakpoints", d.schedule.breakpoints},
          {"beta", d.schedule.beta_values},
          {"gamma", d.schedule.gamma_values},
          {"generator", to_string(d.generator)},
          {"seed", d.seed},
          {"estimate", d.estimate == PointEstimate::mean ? "mean" : "median"},
          {"priors", priors},
          {"mcmc", to_json(d.mcmc)}};
}

inline std::string estimate_csv(const RatePath& path) {
  std::ostringstream out;
  out << "t,param,estimate\n";
  for (Param p : {Param::beta, Param::gamma}) {
    const auto& x = p == Param::beta ? path.beta : path.gamma;
    for (std::size_t t = 0; t < x.size(); ++t) out << t + 1 << ',' << to_string(p) << ',' << format_number(x[t]) << '\n';
  }
  return out.str();
}

inline RatePath read_estimate_csv(const fs::path& path, std::size_t horizon) {
  std::ifstream in(path);
  if (!in) throw ResumeError("missing replicate estimate '" + path.string() + "'");
  RatePath out{std::vector<double>(horizon, 0.0), std::vector<double>(horizon, 0.0)};
  std::string line;
  std::getline(in, line);
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    const auto t = f.size() == 3 ? parse_number(f[0]) : std::nullopt;
    const auto v = f.size() == 3 ? parse_number(f[2]) : std::nullopt;
    if (!t || !v || *t < 1 || *t > static_cast<double>(horizon) || (f[1] != "beta" && f[1] != "gamma"))
      throw ResumeError("corrupt replicate estimate '" + path.string() + "'; clear the study directory");
    (f[1] == "beta" ? out.beta : out.gamma)[static_cast<std::size_t>(*t) - 1] = *v;
    ++seen;
  }
  if (seen != 2 * horizon)
    throw ResumeError("incomplete replicate estimate '" + path.string() + "'; clear the study directory");
  return out;
}

}  // namespace detail

// Runs (or resumes) a replication study in `out_dir`:
//   manifest.json                  provenance and completed replicates
//   data/rep_NNN.csv               simulated series
//   estimates/<prior>/rep_NNN.csv  point-estimate path per replicate and prior
//   estimates_<prior>.csv          all replicates, long format
//   metrics_<prior>.csv            MAB / MSE / SD per day
//   bands_<prior>.csv              pointwise min / max of the estimates
// Replicates listed in an existing manifest with the same fingerprint are
// loaded instead of recomputed.
inline StudyResult run_study(const StudyDesign& design, const std::string& out_dir,
                             const StudyOptions& options = {}) {
  namespace fs = std::filesystem;
  design.validate();
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "data", ec);
  if (ec) throw IoError("cannot create study directory '" + out_dir + "': " + ec.message());
  for (const auto& p : design.priors) {
    fs::create_directories(root / "estimates" / short_name(p.kind), ec);
    if (ec) throw IoError("cannot create study directory: " + ec.message());
  }

  const nlohmann::json fingerprint = detail::study_fingerprint(design);
  const fs::path manifest_path = root / "manifest.json";
  std::set<std::size_t> completed;
  std::string created_at = detail::utc_timestamp();
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json old;
    try {
      old = nlohmann::json::parse(in);
      if (old.at("study") != fingerprint)
        throw ResumeError("manifest in '" + out_dir +
                          "' belongs to a different study configuration; clear the directory or choose another --out");
      for (std::size_t l : old.at("completed").get<std::vector<std::size_t>>()) completed.insert(l);
      created_at = old.at("created_at").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ResumeError("corrupted manifest '" + manifest_path.string() + "' (" + e.what() +
                        "); clear the study directory to start over");
    }
  }

  std::mutex mutex;
  auto write_manifest = [&] {
    nlohmann::json m = {{"format", "tfsir-study/1"},
                        {"study", fingerprint},
                        {"replicates_requested", design.replicates},
                        {"completed", std::vector<std::size_t>(completed.begin(), completed.end())},
                        {"created_at", created_at},
                        {"updated_at", detail::utc_timestamp()}};
    detail::write_file_atomic(manifest_path, m.dump(2) + "\n");
  };
  write_manifest();

  StudyResult result;
  result.priors = design.priors;
  std::vector<std::size_t> pending;
  for (std::size_t l = 1; l <= design.replicates; ++l) {
    if (completed.count(l)) {
      result.skipped.push_back(l);
    } else {
      pending.push_back(l);
    }
  }
  if (options.max_new_replicates > 0 && pending.size() > options.max_new_replicates)
    pending.resize(options.max_new_replicates);

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(pending.size());
  auto worker = [&] {
    for (std::size_t k; (k = next++) < pending.size();) {
      const std::size_t l = pending[k];
      try {
        SimConfig sim;
        sim.n = design.population;
        sim.i0 = design.i0;
        sim.r0 = design.r0;
        sim.horizon = design.horizon;
        sim.seed = replicate_sim_seed(design.seed, l);
        sim.mode = design.generator;
        const CompartmentSeries series = simulate(design.schedule, sim);
        std::ostringstream data;
        write_csv(data, series);
        detail::write_file_atomic(root / "data" / detail::replicate_name(l), data.str());
        for (const auto& prior : design.priors) {
          McmcConfig mc = design.mcmc;
          mc.seed = replicate_fit_seed(design.seed, l);
          const PosteriorDraws draws = fit(series, prior, mc);
          detail::write_file_atomic(root / "estimates" / short_name(prior.kind) / detail::replicate_name(l),
                                    detail::estimate_csv(point_estimate(draws, design.estimate)));
        }
        std::lock_guard lock(mutex);
        completed.insert(l);
        result.computed.push_back(l);
        write_manifest();
        if (options.on_replicate_done) options.on_replicate_done(l);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(pending.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::sort(result.computed.begin(), result.computed.end());

  result.complete = completed.size() >= design.replicates;
  if (!result.complete) return result;

  // Aggregate from the files so resumed and fresh replicates are read alike.
  for (const auto& prior : design.priors) {
    const std::string name = short_name(prior.kind);
    std::vector<RatePath> estimates;
    for (std::size_t l = 1; l <= design.replicates; ++l)
      estimates.push_back(detail::read_estimate_csv(root / "estimates" / name / detail::replicate_name(l), design.horizon));

    std::ostringstream all;
    all << "replicate,t,param,estimate\n";
    for (Param p : {Param::beta, Param::gamma})
      for (std::size_t l = 0; l < estimates.size(); ++l) {
        const auto& x = p == Param::beta ? estimates[l].beta : estimates[l].gamma;
        for (std::size_t t = 0; t < x.size(); ++t)
          all << l + 1 << ',' << t + 1 << ',' << to_string(p) << ',' << format_number(x[t]) << '\n';
      }
    detail::write_file_atomic(root / ("estimates_" + name + ".csv"), all.str());

    const MetricSeries metrics = replication_metrics(estimates, design.schedule);
    std::ostringstream mcsv;
    write_metrics_csv(mcsv, metrics);
    detail::write_file_atomic(root / ("metrics_" + name + ".csv"), mcsv.str());

    std::ostringstream bands;
    bands << "t,param,truth,min,max\n";
    for (Param p : {Param::beta, Param::gamma})
      for (std::size_t t = 0; t < design.horizon; ++t) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& e : estimates) {
          const double v = p == Param::beta ? e.beta[t] : e.gamma[t];
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        const double truth = p == Param::beta ? design.schedule.beta(t) : design.schedule.gamma(t);
        bands << t + 1 << ',' << to_string(p) << ',' << format_number(truth) << ',' << format_number(lo) << ','
              << format_number(hi) << '\n';
      }
    detail::write_file_atomic(root / ("bands_" + name + ".csv"), bands.str());

    result.estimates.push_back(std::move(estimates));
    result.metrics.push_back(metrics);
  }
  return result;
}

}  // namespace tfsir
