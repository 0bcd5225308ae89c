// Runs the sampler on a hemisphere of S^2 from a boundary start and prints the
// rate bound next to the observed mean height, which should approach 1/2.
#include <iostream>

#include "geoslice.hpp"

int main() {
  using namespace geoslice;
  const Target cap = spherical_cap_target(2, std::numbers::pi / 2);
  const GssConfig config(cap, 2.0 * std::numbers::pi, 1, 20240611);

  const BoundsReport bounds = full_report(cap, 1, config.step_out.w, EpsilonMode::Auto);
  std::cout << bounds.to_text() << '\n';

  const ChainRecord chain = run_chain(worst_start(cap), 20000, config, 100);
  double height = 0.0;
  for (const auto& x : chain.states) height += x.coords[2];
  std::cout << "mean height over " << chain.states.size() << " states: " << height / chain.states.size()
            << " (target 0.5)\n";

  const auto ends = endpoint_ensemble(worst_start(cap), 10, 20000, config, default_threads());
  const TvEstimate tv = estimate_tv(ends, make_binning(cap));
  std::cout << "tv after 10 steps: " << tv.tv << " (bound " << std::pow(bounds.rho, 10) << ")\n";
}
