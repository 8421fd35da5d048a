// Satisfaction rate and reward of constant RB splits for one scenario.
// usage: fixed_split_scan [pairs] [mean_se] [fluctuation]
#include <cstdio>
#include <cstdlib>

#include "vhslice/vhslice.hpp"

int main(int argc, char** argv) {
  using namespace vhslice;
  TrialConfig cfg;
  if (argc > 1) cfg.scenario.pairs = std::atoi(argv[1]);
  if (argc > 2) cfg.scenario.mean_se = std::atof(argv[2]);
  if (argc > 3) cfg.scenario.fluctuation = std::atof(argv[3]);
  cfg.validate();
  const int n_rb = cfg.scenario.ran.n_rb;

  std::printf("haptic_rbs  sr      reward_vh  reward_baseline\n");
  for (int h = 0; h <= n_rb / 2; h += 2) {
    double sr = 0, vh = 0, bl = 0;
    for (auto seed : cfg.eval_seeds) {
      cfg.variant = RewardVariant::video_haptic;
      const auto a = run_trial(cfg, seed, fixed_split_policy(h, n_rb));
      cfg.variant = RewardVariant::baseline;
      const auto b = run_trial(cfg, seed, fixed_split_policy(h, n_rb));
      sr += a.sr;
      vh += a.mean_reward;
      bl += b.mean_reward;
    }
    const double n = static_cast<double>(cfg.eval_seeds.size());
    std::printf("%10d  %.3f  %9.3f  %15.3f\n", h, sr / n, vh / n, bl / n);
  }
}
