// Simulates Design 1 once, fits the horseshoe prior with a short chain and
// prints the posterior mean next to the truth every fifth day.
#include <tfsir/tfsir.hpp>

#include <cstdio>

int main() {
  const tfsir::StudyDesign design = tfsir::builtin_design(1);

  tfsir::SimConfig sim;
  sim.n = design.population;
  sim.i0 = design.i0;
  sim.horizon = design.horizon;
  sim.seed = 7;
  const tfsir::CompartmentSeries series = tfsir::simulate(design.schedule, sim);

  tfsir::PriorSpec prior;
  prior.kind = tfsir::PriorKind::horseshoe;
  tfsir::McmcConfig mcmc;
  mcmc.iterations = 10000;
  mcmc.burn_in = 500;
  const tfsir::PosteriorDraws draws = tfsir::fit(series, prior, mcmc);
  const auto bands = tfsir::summarize(draws);

  std::printf("%4s %8s %8s %8s %8s\n", "day", "beta", "est", "gamma", "est");
  for (std::size_t t = 0; t < draws.days; t += 5) {
    const auto& b = bands[t];
    const auto& g = bands[draws.days + t];
    std::printf("%4zu %8.3f %8.3f %8.3f %8.3f\n", t + 1, design.schedule.beta(t), b.mean,
                design.schedule.gamma(t), g.mean);
  }
}
