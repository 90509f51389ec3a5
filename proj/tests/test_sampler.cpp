#include "oracles.hpp"

#include <tfsir/posterior.hpp>
#include <tfsir/sampler.hpp>
#include <tfsir/study.hpp>

#include <gtest/gtest.h>

#include <numeric>

using namespace tfsir;

namespace {

CompartmentSeries simulate_schedule(const RateSchedule& sched, double n, double i0, std::size_t horizon,
                                    std::uint64_t seed, SimMode mode = SimMode::poisson_increment) {
  SimConfig c;
  c.n = n;
  c.i0 = i0;
  c.horizon = horizon;
  c.seed = seed;
  c.mode = mode;
  return simulate(sched, c);
}

CompartmentSeries design_one_data() {
  const auto d = builtin_design(1);
  return simulate_schedule(d.schedule, d.population, d.i0, d.horizon, 31);
}

McmcConfig short_config(std::uint64_t seed = 5) {
  McmcConfig c;
  c.iterations = 6000;
  c.thin = 10;
  c.burn_in = 200;
  c.seed = seed;
  return c;
}

bool same_draws(const PosteriorDraws& a, const PosteriorDraws& b) {
  return a.beta == b.beta && a.gamma == b.gamma && a.lambda == b.lambda && a.eta == b.eta &&
         a.sigma2_beta == b.sigma2_beta && a.sigma2_gamma == b.sigma2_gamma;
}

// One full-length Design-1 horseshoe fit shared by several tests.
class DesignOneFit : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    PriorSpec spec;
    spec.kind = PriorKind::horseshoe;
    draws_ = new PosteriorDraws(fit(design_one_data(), spec, McmcConfig{}));
  }
  static void TearDownTestSuite() {
    delete draws_;
    draws_ = nullptr;
  }
  static PosteriorDraws* draws_;
};

PosteriorDraws* DesignOneFit::draws_ = nullptr;

}  // namespace

TEST(McmcConfig, DefaultsKeep2000) {
  McmcConfig c;
  EXPECT_EQ(c.iterations, 50000u);
  EXPECT_EQ(c.thin, 10u);
  EXPECT_EQ(c.burn_in, 3000u);
  EXPECT_EQ(c.kept(), 2000u);
  EXPECT_EQ(c.adaptation_end(), 30000u);
  EXPECT_NO_THROW(c.validate());
}

TEST(McmcConfig, Invalid) {
  McmcConfig c;
  c.thin = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = McmcConfig{};
  c.burn_in = 5000;
  EXPECT_THROW(c.validate(), ConfigError);
  c = McmcConfig{};
  c.adapt_until = 40000;
  EXPECT_THROW(c.validate(), ConfigError);
  c = McmcConfig{};
  c.mean_lag = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = McmcConfig{};
  c.init = InitMode::fixed;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(fit(design_one_data(), PriorSpec{}, c), ConfigError);
}

TEST(InitFromData, Guards) {
  CompartmentSeries s;
  s.n = 1000;
  for (int t = 0; t < 6; ++t) {
    s.dates.push_back(Date{std::chrono::year{2020} / 3 / 1} + std::chrono::days{t});
    s.s.push_back(900);
    s.i.push_back(t < 3 ? 100 : 0);
    s.r.push_back(t < 3 ? 0 : 100);
  }
  // Day 3 removes everybody; afterwards I = 0 and nothing changes.
  const auto inc = to_increments(s);
  const auto init = init_from_data(s, inc);
  for (std::size_t t = 0; t < 6; ++t) {
    EXPECT_TRUE(std::isfinite(init.beta[t]));
    EXPECT_GE(init.beta[t], 1e-6);
    EXPECT_LE(init.gamma[t], 10.0);
  }
  // Zero new cases everywhere: the floor survives smoothing.
  for (std::size_t t = 0; t < 6; ++t) EXPECT_DOUBLE_EQ(init.beta[t], 1e-6);
}

TEST(InitFromData, OdeCountsRecoverRates) {
  const auto d = builtin_design(1);
  SimConfig c;
  c.n = d.population;
  c.i0 = d.i0;
  c.horizon = d.horizon;
  const auto ode = solve_ode(d.schedule, c);
  const auto init = init_from_data(ode, to_increments(ode));
  for (std::size_t t = 1; t < d.horizon; ++t) {
    const std::size_t piece = d.schedule.segment(t);
    if (t < 2 || d.schedule.segment(t - 2) != piece || d.schedule.segment(t + 2) != piece) continue;
    EXPECT_NEAR(init.beta[t] / d.schedule.beta(t), 1.0, 0.1) << t;
    EXPECT_NEAR(init.gamma[t] / d.schedule.gamma(t), 1.0, 0.1) << t;
  }
}

TEST(Fit, DeterministicUnderSeed) {
  const auto data = design_one_data();
  for (PriorKind kind : {PriorKind::student_t, PriorKind::horseshoe, PriorKind::spike_slab}) {
    PriorSpec spec;
    spec.kind = kind;
    const auto a = fit(data, spec, short_config());
    const auto b = fit(data, spec, short_config());
    EXPECT_TRUE(same_draws(a, b)) << to_string(kind);
    EXPECT_FALSE(same_draws(a, fit(data, spec, short_config(6)))) << to_string(kind);
  }
}

TEST(Fit, DrawsNonnegativeAndShaped) {
  const auto data = design_one_data();
  for (PriorKind kind : {PriorKind::student_t, PriorKind::spike_slab}) {
    PriorSpec spec;
    spec.kind = kind;
    const auto d = fit(data, spec, short_config());
    EXPECT_EQ(d.samples, 400u);
    EXPECT_EQ(d.beta.size(), 400u * 80);
    EXPECT_EQ(d.provenance.prior_digest, spec.digest());
    for (double v : d.beta) ASSERT_GE(v, 0.0);
    for (double v : d.gamma) ASSERT_GE(v, 0.0);
    if (kind != PriorKind::spike_slab) continue;
    for (std::size_t k = 0; k < d.samples; ++k)
      for (std::size_t t = 1; t < d.days; ++t) {
        const double v = d.local_at(Param::beta, k, t);
        ASSERT_TRUE(v == 0 || v == 1);
      }
  }
}

TEST(Fit, ZeroIncrementsFallBackToPrior) {
  CompartmentSeries s;
  s.n = 1000;
  for (int t = 0; t < 10; ++t) {
    s.dates.push_back(Date{std::chrono::year{2020} / 3 / 1} + std::chrono::days{t});
    s.s.push_back(990);
    s.i.push_back(10);
    s.r.push_back(0);
  }
  const auto d = fit(s, PriorSpec{}, short_config());
  ASSERT_FALSE(d.provenance.warnings.empty());
  EXPECT_NE(d.provenance.warnings.front().find("prior"), std::string::npos);
  for (double v : d.beta) EXPECT_GE(v, 0.0);
}

TEST(Fit, ConstantRateRecovery) {
  const auto data = simulate_schedule(RateSchedule::constant(0.1, 0.05), 1e6, 100, 80, 12);
  for (PriorKind kind : {PriorKind::student_t, PriorKind::horseshoe}) {
    PriorSpec spec;
    spec.kind = kind;
    const auto d = fit(data, spec, McmcConfig{});
    const auto beta = d.mean_path(Param::beta);
    const double avg = std::accumulate(beta.begin(), beta.end(), 0.0) / static_cast<double>(beta.size());
    EXPECT_NEAR(avg, 0.1, 0.01) << to_string(kind);
    // The heavy-tailed t prior lets day-level Poisson noise through, so only
    // the horseshoe is expected to report nothing on constant rates.
    if (kind == PriorKind::horseshoe) {
      EXPECT_TRUE(change_point_report(d, 0.5).empty());
    }
  }
}

TEST_F(DesignOneFit, AcceptanceRatesInSanityBand) {
  for (std::size_t t = 0; t < draws_->days; ++t) {
    EXPECT_GE(draws_->accept_beta[t], 0.2) << t;
    EXPECT_LE(draws_->accept_beta[t], 0.7) << t;
    EXPECT_GE(draws_->accept_gamma[t], 0.2) << t;
    EXPECT_LE(draws_->accept_gamma[t], 0.7) << t;
  }
}

TEST_F(DesignOneFit, StepsFrozenAfterAdaptation) {
  EXPECT_EQ(draws_->step_beta_adapted, draws_->step_beta_final);
  EXPECT_EQ(draws_->step_gamma_adapted, draws_->step_gamma_final);
  EXPECT_EQ(draws_->samples, 2000u);
}

TEST(RunChains, SingleChainMatchesFit) {
  const auto data = design_one_data();
  const auto chains = run_chains(data, PriorSpec{}, short_config(), 1);
  ASSERT_EQ(chains.size(), 1u);
  EXPECT_TRUE(same_draws(chains[0], fit(data, PriorSpec{}, short_config())));
}

TEST(RunChains, DeterministicAndWorkerIndependent) {
  const auto data = design_one_data();
  const auto a = run_chains(data, PriorSpec{}, short_config(), 4, 1);
  const auto b = run_chains(data, PriorSpec{}, short_config(), 4, 4);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_TRUE(same_draws(a[c], b[c])) << c;
    EXPECT_EQ(a[c].provenance.chain, c);
    EXPECT_EQ(a[c].provenance.seed, chain_seed(short_config().seed, c));
  }
  EXPECT_FALSE(same_draws(a[0], a[1]));
}

TEST(RunChains, GelmanRubinOnConstantRateData) {
  const auto data = simulate_schedule(RateSchedule::constant(0.1, 0.05), 1e6, 100, 80, 13);
  const auto chains = run_chains(data, PriorSpec{}, McmcConfig{}, 4, 4);
  std::vector<std::vector<double>> means;
  for (const auto& c : chains) {
    std::vector<double> m(c.samples);
    for (std::size_t k = 0; k < c.samples; ++k) {
      double s = 0;
      for (std::size_t t = 0; t < c.days; ++t) s += c.beta_at(k, t);
      m[k] = s / static_cast<double>(c.days);
    }
    means.push_back(std::move(m));
  }
  EXPECT_LT(gelman_rubin(means), 1.1);
}

TEST(PriorOnly, StudentTMarginalMatchesAncestralDraws) {
  PriorSpec spec;
  spec.a = spec.b = 2.0;
  spec.a_sigma_beta = spec.a_sigma_gamma = 50;
  spec.b_sigma_beta = spec.b_sigma_gamma = 50;
  const auto data = design_one_data();
  McmcConfig c;
  c.iterations = 100000;
  c.thin = 50;
  c.burn_in = 0;
  c.adapt_until = 0;
  c.initial_step = 1.0;
  c.likelihood_weight = 0;
  c.init = InitMode::from_prior;
  CompartmentSeries small = data;
  for (auto* v : {&small.s, &small.i, &small.r}) v->resize(6);
  small.dates.resize(6);
  const auto d = fit(small, spec, c);
  std::vector<double> mcmc, ancestral;
  for (std::size_t k = 0; k < d.samples; ++k) mcmc.push_back(d.beta_at(k, 3) - d.beta_at(k, 2));
  Rng rng(8);
  for (int k = 0; k < 20000; ++k) {
    const auto path = sample_prior_path(spec, 6, rng).first;
    ancestral.push_back(path.beta[3] - path.beta[2]);
  }
  // Two-sample KS critical value at the 0.1% level.
  const double n = static_cast<double>(mcmc.size()), m = static_cast<double>(ancestral.size());
  EXPECT_LT(oracle::ks_two_sample(mcmc, ancestral), 1.95 * std::sqrt((n + m) / (n * m)));
}
