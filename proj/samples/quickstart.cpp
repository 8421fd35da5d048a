// Trains a small agent on a light scenario and compares it with a fixed split.
#include <iostream>

#include "vhslice/vhslice.hpp"

int main() {
  using namespace vhslice;
  TrialConfig cfg;
  cfg.training = training_profile("fast");
  cfg.training.steps = 3000;
  cfg.scenario.pairs = 10;
  cfg.scenario.t_slice_ms = 10;
  cfg.scenario.trial_ttis = 5000;

  auto agent = train_agent(cfg);
  const int n_rb = cfg.scenario.ran.n_rb;
  const auto learned = evaluate(cfg, agent_policy(*agent, n_rb, cfg.scenario.rb_min));
  const auto even = evaluate(cfg, fixed_split_policy(n_rb / 2, n_rb));

  for (std::size_t i = 0; i < learned.size(); ++i)
    std::cout << "seed " << learned[i].seed << "  agent sr " << learned[i].sr << "  50/50 sr " << even[i].sr << '\n';
}
