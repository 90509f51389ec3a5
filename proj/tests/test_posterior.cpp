#include "oracles.hpp"

#include <tfsir/posterior.hpp>
#include <tfsir/random.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace tfsir;

namespace {

// Draws whose beta column on day t is `cols[t]` and gamma is twice that.
PosteriorDraws draws_from_columns(const std::vector<std::vector<double>>& cols, PriorKind kind) {
  PosteriorDraws d;
  d.days = cols.size();
  d.samples = cols.front().size();
  d.beta.resize(d.days * d.samples);
  d.gamma.resize(d.days * d.samples);
  d.lambda.assign(d.days * d.samples, 0.0);
  d.eta.assign(d.days * d.samples, 0.0);
  d.sigma2_beta.assign(d.samples, 1.0);
  d.sigma2_gamma.assign(d.samples, 1.0);
  for (std::size_t k = 0; k < d.samples; ++k)
    for (std::size_t t = 0; t < d.days; ++t) {
      d.beta[k * d.days + t] = cols[t][k];
      d.gamma[k * d.days + t] = 2 * cols[t][k];
    }
  d.provenance.prior.kind = kind;
  return d;
}

RateSchedule design_truth() {
  return RateSchedule::equal_pieces(8, {0.15, 0.2}, {0.05, 0.09});
}

}  // namespace

TEST(Hpd, UniformGrid) {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  const auto [lo, hi] = hpd_interval(x, 0.95);
  EXPECT_EQ(lo, 1.0);
  EXPECT_EQ(hi, 95.0);
}

TEST(Hpd, ConstantSamples) {
  const auto [lo, hi] = hpd_interval(std::vector<double>(50, 0.3), 0.9);
  EXPECT_EQ(lo, 0.3);
  EXPECT_EQ(hi, 0.3);
}

TEST(Hpd, StandardNormal) {
  Rng rng(1);
  std::vector<double> x(100000);
  for (double& v : x) v = rng.normal();
  const auto [lo, hi] = hpd_interval(x, 0.95);
  EXPECT_NEAR(lo, -1.96, 0.08);
  EXPECT_NEAR(hi, 1.96, 0.08);
}

TEST(Hpd, Errors) {
  EXPECT_THROW(hpd_interval(std::vector<double>(9, 1.0)), ShapeError);
  EXPECT_THROW(hpd_interval(std::vector<double>(20, 1.0), 1.0), DomainError);
  EXPECT_THROW(hpd_interval(std::vector<double>(20, 1.0), 0.0), DomainError);
}

TEST(Hpd, SkewedSampleShiftsLeft) {
  Rng rng(2);
  std::vector<double> x(20000);
  for (double& v : x) v = rng.gamma(1.0, 1.0);
  const auto [lo, hi] = hpd_interval(x, 0.95);
  // Exponential(1): the HPD interval is [0, -log 0.05].
  EXPECT_LT(lo, 0.01);
  EXPECT_NEAR(hi, -std::log(0.05), 0.1);
}

TEST(Hpd, MatchesBruteForce) {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 10 + static_cast<std::size_t>(rng.uniform() * 300);
    std::vector<double> x(n);
    // Rounded values force ties between windows.
    for (double& v : x) v = std::round(10 * rng.normal()) / 4;
    std::sort(x.begin(), x.end());
    const double level = rep % 2 ? 0.95 : 0.5 + 0.45 * rng.uniform();
    const auto got = hpd_window(x, level);
    const auto want = oracle::brute_force_hpd(x, level);
    EXPECT_EQ(got.first, want.first) << n << ' ' << level;
    EXPECT_EQ(got.last, want.second);
  }
}

TEST(Summarize, BandsPerDay) {
  std::vector<double> col(100);
  std::iota(col.begin(), col.end(), 1.0);
  const auto d = draws_from_columns({col, std::vector<double>(100, 2.0)}, PriorKind::horseshoe);
  const auto bands = summarize(d);
  ASSERT_EQ(bands.size(), 4u);
  EXPECT_EQ(bands[0].param, Param::beta);
  EXPECT_DOUBLE_EQ(bands[0].mean, 50.5);
  EXPECT_DOUBLE_EQ(bands[0].median, 50.5);
  EXPECT_EQ(bands[0].hpd_lo, 1.0);
  EXPECT_EQ(bands[0].hpd_hi, 95.0);
  EXPECT_EQ(bands[1].hpd_lo, 2.0);
  EXPECT_EQ(bands[3].param, Param::gamma);
  EXPECT_EQ(bands[3].hpd_hi, 4.0);
  for (const auto& b : bands) EXPECT_LE(b.hpd_lo, b.hpd_hi);

  std::ostringstream out;
  write_summary_csv(out, bands);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "t,param,mean,median,hpd_lo,hpd_hi");
  EXPECT_NE(out.str().find("\n1,beta,50.5,50.5,1,95\n"), std::string::npos);
}

TEST(PointEstimate, MeanAndMedian) {
  const auto d = draws_from_columns({{1, 2, 3, 10}}, PriorKind::student_t);
  EXPECT_DOUBLE_EQ(point_estimate(d).beta[0], 4.0);
  EXPECT_DOUBLE_EQ(point_estimate(d, PointEstimate::median).beta[0], 2.5);
  EXPECT_DOUBLE_EQ(point_estimate(d, PointEstimate::median).gamma[0], 5.0);
}

TEST(ReplicationMetrics, ConstantOffset) {
  const auto truth = design_truth();
  RatePath up{truth.beta_path(8), truth.gamma_path(8)}, down = up;
  for (auto& v : up.beta) v += 0.01;
  for (auto& v : down.beta) v -= 0.01;
  const auto m = replication_metrics({up, down}, truth);
  for (std::size_t t = 0; t < 8; ++t) {
    EXPECT_NEAR(m.beta.mab[t], 0.01, 1e-15);
    EXPECT_NEAR(m.beta.mse[t], 1e-4, 1e-15);
    EXPECT_NEAR(m.beta.sd[t], 2e-4, 1e-15);
    EXPECT_EQ(m.gamma.mab[t], 0.0);
  }
}

TEST(ReplicationMetrics, SingleReplicateHasNoSpread) {
  const auto truth = design_truth();
  const auto m = replication_metrics({RatePath{truth.beta_path(8), truth.gamma_path(8)}}, truth);
  for (std::size_t t = 0; t < 8; ++t) {
    EXPECT_TRUE(std::isnan(m.beta.sd[t]));
    EXPECT_EQ(m.beta.mab[t], 0.0);
  }
  std::ostringstream out;
  write_metrics_csv(out, m);
  EXPECT_NE(out.str().find("1,beta,0,0,NA,NA"), std::string::npos);
}

TEST(ReplicationMetrics, PermutationInvariant) {
  Rng rng(4);
  const auto truth = design_truth();
  std::vector<RatePath> est;
  for (int l = 0; l < 6; ++l) {
    RatePath p{truth.beta_path(8), truth.gamma_path(8)};
    for (auto& v : p.beta) v += 0.02 * rng.normal();
    for (auto& v : p.gamma) v += 0.02 * rng.normal();
    est.push_back(p);
  }
  const auto a = replication_metrics(est, truth);
  std::shuffle(est.begin(), est.end(), rng.engine());
  const auto b = replication_metrics(est, truth);
  for (std::size_t t = 0; t < 8; ++t) {
    EXPECT_NEAR(a.beta.mab[t], b.beta.mab[t], 1e-15);
    EXPECT_NEAR(a.gamma.mse[t], b.gamma.mse[t], 1e-15);
    EXPECT_NEAR(a.beta.sd[t], b.beta.sd[t], 1e-15);
  }
}

TEST(ReplicationMetrics, Errors) {
  const auto truth = design_truth();
  EXPECT_THROW(replication_metrics({}, truth), ShapeError);
  RatePath a{truth.beta_path(8), truth.gamma_path(8)}, b{truth.beta_path(7), truth.gamma_path(7)};
  EXPECT_THROW(replication_metrics({a, b}, truth), ShapeError);
}

TEST(ChangePoints, ContinuousPriorFlagsClearJump) {
  Rng rng(5);
  std::vector<std::vector<double>> cols(4, std::vector<double>(500));
  for (std::size_t k = 0; k < 500; ++k) {
    cols[0][k] = 0.1 + 0.001 * rng.normal();
    cols[1][k] = 0.1 + 0.001 * rng.normal();
    cols[2][k] = 0.2 + 0.001 * rng.normal();
    cols[3][k] = 0.2 + 0.001 * rng.normal();
  }
  const auto cps = change_point_report(draws_from_columns(cols, PriorKind::student_t));
  ASSERT_EQ(cps.size(), 2u);
  EXPECT_EQ(cps[0].t, 2u);
  EXPECT_EQ(cps[0].param, Param::beta);
  EXPECT_GT(cps[0].lo, 0.09);
  EXPECT_EQ(cps[1].param, Param::gamma);
  EXPECT_TRUE(std::isnan(cps[0].frequency));
}

TEST(ChangePoints, SpikeSlabFrequencyThreshold) {
  auto d = draws_from_columns({std::vector<double>(10, 0.1), std::vector<double>(10, 0.1)}, PriorKind::spike_slab);
  for (std::size_t k = 0; k < 10; ++k) d.lambda[k * 2 + 1] = k < 7 ? 1.0 : 0.0;
  auto cps = change_point_report(d, 0.5);
  ASSERT_EQ(cps.size(), 1u);
  EXPECT_DOUBLE_EQ(cps[0].frequency, 0.7);
  EXPECT_TRUE(change_point_report(d, 0.7).empty());
  EXPECT_TRUE(change_point_report(d, 1.0).empty());

  std::ostringstream out;
  write_change_points_csv(out, cps);
  EXPECT_EQ(out.str(), "t,param,lo,hi,frequency\n2,beta,NA,NA,0.7\n");
}

TEST(GelmanRubin, IdenticalAndSeparatedChains) {
  Rng rng(6);
  std::vector<std::vector<double>> same(4, std::vector<double>(2000));
  for (auto& c : same)
    for (double& v : c) v = rng.normal();
  EXPECT_LT(gelman_rubin(same), 1.01);
  auto apart = same;
  for (double& v : apart[0]) v += 5;
  EXPECT_GT(gelman_rubin(apart), 1.5);
  EXPECT_THROW(gelman_rubin({same[0]}), ShapeError);
  EXPECT_THROW(gelman_rubin({{1.0, 2.0}, {1.0}}), ShapeError);
}
