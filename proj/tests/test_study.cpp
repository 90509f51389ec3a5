#include <tfsir/study.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tfsir;
namespace fs = std::filesystem;

namespace {

StudyDesign quick_design(std::size_t replicates) {
  StudyDesign d = builtin_design(1);
  d.replicates = replicates;
  d.priors = {PriorSpec{}};
  d.priors[0].kind = PriorKind::horseshoe;
  d.mcmc.iterations = 800;
  d.mcmc.thin = 4;
  d.mcmc.burn_in = 20;
  return d;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tfsir_study_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every file in the tree except the manifest, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST(Designs, BuiltinTable) {
  const auto all = builtin_designs();
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0].schedule.beta(25), 0.20);
  EXPECT_EQ(all[0].schedule.beta(19), 0.15);
  EXPECT_EQ(all[3].schedule.gamma(70), 0.03);
  EXPECT_EQ(all[2].population, 1e7);
  EXPECT_EQ(all[2].i0, 1000);
  for (const auto& d : all) {
    EXPECT_EQ(d.horizon, 80u);
    EXPECT_EQ(d.schedule.breakpoints, (std::vector<std::size_t>{20, 40, 60}));
    EXPECT_EQ(d.priors.size(), 3u);
    EXPECT_NO_THROW(d.validate());
  }
  EXPECT_THROW(builtin_design(5), ConfigError);
}

TEST(Designs, Validation) {
  auto d = quick_design(2);
  d.generator = SimMode::ode;
  EXPECT_THROW(d.validate(), ConfigError);
  d = quick_design(0);
  EXPECT_THROW(d.validate(), ConfigError);
  d = quick_design(2);
  d.priors.clear();
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Seeds, ReplicateStreamsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::size_t l = 1; l <= 50; ++l) {
    seen.insert(replicate_sim_seed(1, l));
    seen.insert(replicate_fit_seed(1, l));
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Study, SingleReplicateHasNoSpread) {
  const auto dir = temp_dir("single");
  const auto r = run_study(quick_design(1), dir.string());
  ASSERT_TRUE(r.complete);
  ASSERT_EQ(r.metrics.size(), 1u);
  for (double v : r.metrics[0].beta.sd) EXPECT_TRUE(std::isnan(v));
  for (double v : r.metrics[0].beta.mab) EXPECT_TRUE(std::isfinite(v));
  const std::string metrics = slurp(dir / "metrics_horseshoe.csv");
  EXPECT_NE(metrics.find(",NA,NA\n"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Study, OutputsAndResume) {
  const auto fresh = temp_dir("fresh");
  const auto resumed = temp_dir("resumed");
  const auto design = quick_design(8);

  const auto full = run_study(design, fresh.string());
  ASSERT_TRUE(full.complete);
  EXPECT_EQ(full.computed.size(), 8u);
  for (const char* f : {"manifest.json", "data/rep_001.csv", "estimates/horseshoe/rep_008.csv",
                        "estimates_horseshoe.csv", "metrics_horseshoe.csv", "bands_horseshoe.csv"})
    EXPECT_TRUE(fs::exists(fresh / f)) << f;
  for (const auto& e : fs::recursive_directory_iterator(fresh))
    EXPECT_NE(e.path().extension(), ".partial") << e.path();

  // Interrupt after seven replicates, then resume.
  StudyOptions stop;
  stop.max_new_replicates = 7;
  const auto first = run_study(design, resumed.string(), stop);
  EXPECT_FALSE(first.complete);
  EXPECT_EQ(first.computed.size(), 7u);
  EXPECT_FALSE(fs::exists(resumed / "metrics_horseshoe.csv"));

  std::vector<std::size_t> done;
  StudyOptions go;
  go.on_replicate_done = [&](std::size_t l) { done.push_back(l); };
  const auto second = run_study(design, resumed.string(), go);
  EXPECT_TRUE(second.complete);
  EXPECT_EQ(done, (std::vector<std::size_t>{8}));
  EXPECT_EQ(second.skipped, (std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7}));

  EXPECT_EQ(tree(fresh), tree(resumed));
  const auto manifest = nlohmann::json::parse(slurp(resumed / "manifest.json"));
  EXPECT_EQ(manifest.at("completed").size(), 8u);
  EXPECT_EQ(manifest.at("format"), "tfsir-study/1");

  // Aggregates from the resumed run match the in-memory fresh results.
  for (std::size_t l = 0; l < 8; ++l) EXPECT_EQ(second.estimates[0][l].beta, full.estimates[0][l].beta);
  fs::remove_all(fresh);
  fs::remove_all(resumed);
}

TEST(Study, JobsDoNotChangeResults) {
  const auto a = temp_dir("jobs1");
  const auto b = temp_dir("jobs3");
  StudyOptions one, three;
  three.jobs = 3;
  run_study(quick_design(3), a.string(), one);
  run_study(quick_design(3), b.string(), three);
  EXPECT_EQ(tree(a), tree(b));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Study, ResumeGuards) {
  const auto dir = temp_dir("guards");
  run_study(quick_design(1), dir.string());

  auto other = quick_design(1);
  other.seed = 2;
  EXPECT_THROW(run_study(other, dir.string()), ResumeError);

  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << "{ not json";
  }
  EXPECT_THROW(run_study(quick_design(1), dir.string()), ResumeError);

  fs::remove_all(dir);
  run_study(quick_design(1), dir.string());
  {
    std::ofstream out(dir / "estimates" / "horseshoe" / "rep_001.csv", std::ios::trunc);
    out << "t,param,estimate\n1,beta,oops\n";
  }
  EXPECT_THROW(run_study(quick_design(1), dir.string()), ResumeError);
  fs::remove_all(dir);
}

TEST(Study, MedianEstimateAndSsaGenerator) {
  const auto dir = temp_dir("median");
  auto d = quick_design(2);
  d.estimate = PointEstimate::median;
  d.generator = SimMode::ssa;
  const auto r = run_study(d, dir.string());
  ASSERT_TRUE(r.complete);
  for (const auto& path : r.estimates[0])
    for (double v : path.beta) EXPECT_GE(v, 0.0);
  fs::remove_all(dir);
}
