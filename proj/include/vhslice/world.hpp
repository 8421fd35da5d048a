#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vhslice/agent.hpp"
#include "vhslice/channel.hpp"
#include "vhslice/common.hpp"
#include "vhslice/ran.hpp"
#include "vhslice/reward.hpp"
#include "vhslice/scheduler.hpp"
#include "vhslice/traffic.hpp"

namespace vhslice {

// Everything that defines the radio/traffic scenario of one trial.
struct ScenarioConfig {
  int pairs = 20;  // U
  double mean_se = 5.0;
  double fluctuation = 0.25;
  int correlation_ms = 50;
  int t_slice_ms = 1;
  std::int64_t trial_ttis = 10'000;
  std::int64_t warmup_ttis = 200;
  double pd_reduction = 0.0;
  int rb_min = 1;
  IntraSliceScheduler scheduler = IntraSliceScheduler::proportional;
  RanConfig ran;
  SliceSpec haptic = SliceSpec::haptic();
  SliceSpec video = SliceSpec::video();
  std::string haptic_trace;  // optional CSV replayed by every haptic flow
  std::string se_trace;      // optional CSV replacing the synthetic channel

  void validate() const {
    if (pairs < 1) throw ConfigError("scenario.pairs: must be >= 1");
    if (!(mean_se > 0.0)) throw ConfigError("scenario.mean_se: must be > 0");
    if (fluctuation < 0.0 || fluctuation > 0.5)
      throw ConfigError("scenario.fluctuation: must be in [0, 0.5]");
    if (correlation_ms <= 0) throw ConfigError("scenario.correlation_ms: must be > 0");
    if (t_slice_ms < 1) throw ConfigError("scenario.t_slice_ms: must be >= 1");
    if (trial_ttis < 1) throw ConfigError("scenario.trial_ttis: must be >= 1");
    if (warmup_ttis < 0 || warmup_ttis >= trial_ttis)
      throw ConfigError("scenario.warmup_ttis: must be in [0, trial_ttis)");
    if (pd_reduction < 0.0 || pd_reduction >= 1.0)
      throw ConfigError("scenario.pd_reduction: must be in [0, 1)");
    ran.validate();
    if (rb_min < 0 || 2 * rb_min > ran.n_rb) throw ConfigError("scenario.rb_min: must be in [0, n_rb/2]");
    haptic.validate();
    video.validate();
  }
};

// Flow layout: pair p owns operator user p (one haptic flow) and teleoperator
// user U + p (one haptic and one video flow).
struct FlowLayout {
  std::vector<std::size_t> haptic_links;
  std::vector<std::size_t> video_links;
};

// One simulated cell: traffic sources, channel, buffers and the intra-slice
// scheduler. Advanced one TTI at a time with the haptic slice's RB share.
class World {
 public:
  World(const ScenarioConfig& cfg, std::uint64_t seed,
        std::shared_ptr<const HapticTrace> haptic_trace = nullptr,
        std::shared_ptr<const SeTrace> se_trace = nullptr)
      : cfg_(cfg),
        seed_(seed),
        ran_(cfg.ran, cfg.haptic, cfg.video),
        haptic_sched_(cfg.scheduler),
        video_sched_(cfg.scheduler) {
    cfg_.validate();
    const int u = cfg_.pairs;
    const std::size_t users = static_cast<std::size_t>(2 * u);
    if (se_trace) {
      if (se_trace->num_users() < users)
        throw ConfigError("scenario.se_trace: trace has fewer users than the scenario");
      spectrum_ = std::make_unique<SeTrace>(*se_trace);
    } else {
      ChannelParams cp{cfg_.mean_se, cfg_.fluctuation, cfg_.correlation_ms, derive_seed(seed, 0xC4A)};
      spectrum_ = std::make_unique<ChannelModel>(cp, users);
    }

    Rng phase_rng(derive_seed(seed, 0x9A5E));
    std::uint64_t tag = 0x1000;
    auto add_haptic = [&](UserId user, int pair) {
      const auto link = ran_.add_link(user, Modality::haptic, pair);
      layout_.haptic_links.push_back(link);
      if (haptic_trace) {
        const auto period = std::max<std::int64_t>(1, std::llround(haptic_trace->duration_ms()) + 1);
        const auto offset = static_cast<std::int64_t>(uniform01(phase_rng) * static_cast<double>(period));
        sources_.emplace_back(haptic_trace, offset, link << 32);
      } else {
        sources_.emplace_back(haptic_source(derive_seed(seed, tag), cfg_.pd_reduction), link << 32);
      }
      ++tag;
    };
    for (int p = 0; p < u; ++p) {
      add_haptic(p, p);
      add_haptic(u + p, p);
      const auto link = ran_.add_link(u + p, Modality::video, p);
      layout_.video_links.push_back(link);
      const double phase = uniform01(phase_rng) * kVideoPeriodMs;
      sources_.emplace_back(video_source(derive_seed(seed, tag++), phase), link << 32);
    }
    // sources_ was filled in link order
    user_se_.assign(users, 0.0);
    link_se_.assign(ran_.num_links(), 0.0);
    link_rbs_.assign(ran_.num_links(), 0);
  }

  const ScenarioConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  int pairs() const { return cfg_.pairs; }
  std::int64_t tti() const { return tti_; }
  const Ran& ran() const { return ran_; }
  const FlowLayout& layout() const { return layout_; }
  const KpiSnapshot& snapshot() const { return snapshot_; }
  const std::vector<bool>& satisfied() const { return satisfied_; }
  const std::vector<LinkStep>& last_step() const { return ran_.last_steps(); }
  const std::vector<int>& last_allocation() const { return link_rbs_; }
  int last_haptic_rbs() const { return haptic_rbs_; }

  // Advances one TTI with `haptic_rbs` for the haptic slice and the rest of
  // the carrier for the video slice.
  void step(int haptic_rbs) {
    const int n_rb = cfg_.ran.n_rb;
    if (haptic_rbs < 0 || haptic_rbs > n_rb) throw std::invalid_argument("World::step: bad haptic_rbs");
    haptic_rbs_ = haptic_rbs;
    arrivals_.clear();
    for (std::size_t i = 0; i < sources_.size(); ++i) {
      arrivals_.clear();
      sources_[i].generate(tti_, arrivals_);
      for (const auto& p : arrivals_) ran_.enqueue(i, p);
    }
    ran_.begin_tti(tti_);

    for (std::size_t user = 0; user < user_se_.size(); ++user)
      user_se_[user] = spectrum_->se(static_cast<UserId>(user), tti_);
    for (std::size_t i = 0; i < ran_.num_links(); ++i)
      link_se_[i] = user_se_[static_cast<std::size_t>(ran_.link(i).user)];

    allocate(layout_.haptic_links, haptic_rbs, haptic_sched_);
    allocate(layout_.video_links, n_rb - haptic_rbs, video_sched_);
    ran_.transmit(link_rbs_, link_se_);
    snapshot_ = ran_.snapshot();
    satisfied_ = check_satisfaction(ran_, snapshot_, cfg_.pairs);
    ++tti_;
  }

 private:
  void allocate(const std::vector<std::size_t>& links, int rbs, IntraSliceScheduling& sched) {
    const auto occ = ran_.occupancies(links);
    const auto alloc = sched.allocate(rbs, occ);
    for (std::size_t k = 0; k < links.size(); ++k) link_rbs_[links[k]] = alloc[k];
  }

  ScenarioConfig cfg_;
  std::uint64_t seed_;
  Ran ran_;
  IntraSliceScheduling haptic_sched_;
  IntraSliceScheduling video_sched_;
  std::unique_ptr<SpectrumSource> spectrum_;
  std::vector<TrafficGenerator> sources_;
  FlowLayout layout_;
  std::vector<Packet> arrivals_;
  std::vector<double> user_se_;
  std::vector<double> link_se_;
  std::vector<int> link_rbs_;
  KpiSnapshot snapshot_;
  std::vector<bool> satisfied_;
  std::int64_t tti_ = 0;
  int haptic_rbs_ = 0;
};

inline constexpr std::size_t kObservationDim = 10;
using Observation = std::array<double, kObservationDim>;

// Slice features scaled to [0, 1]: SE by 10 bits/Hz, buffer by r0 * tau_max,
// latency by tau_max, loss as is, rate by 2 * r0.
inline Observation make_observation(const KpiSnapshot& snap, const SliceSpec& h, const SliceSpec& v) {
  Observation o{};
  auto fill = [&](std::size_t base, const SliceKpi& k, const SliceSpec& s) {
    const double buffer_cap = s.rate_req_bps * s.max_buffer_delay_ms / 1000.0;
    o[base + 0] = k.se / 10.0;
    o[base + 1] = k.buffer_bits / buffer_cap;
    o[base + 2] = k.tau_ms / s.max_buffer_delay_ms;
    o[base + 3] = k.rho;
    o[base + 4] = k.rate_bps / (2.0 * s.rate_req_bps);
    for (std::size_t i = base; i < base + 5; ++i) o[i] = std::clamp(o[i], 0.0, 1.0);
  };
  fill(0, snap.haptic, h);
  fill(5, snap.video, v);
  return o;
}

struct EnvStep {
  Observation obs{};
  RewardBreakdown reward;
  int ttis = 0;  // TTIs advanced by this decision
  bool done = false;
};

// Per-TTI hook for logging: called after every TTI with the world state.
using TtiObserver = std::function<void(const World&)>;

// Decision-level wrapper: one step = one slicing decision held for t_slice
// TTIs; the reward is read from the KPI snapshot at the end of the interval.
class SlicingEnv {
 public:
  SlicingEnv(const ScenarioConfig& cfg, RewardConfig reward, std::uint64_t seed,
             std::shared_ptr<const HapticTrace> haptic_trace = nullptr,
             std::shared_ptr<const SeTrace> se_trace = nullptr)
      : world_(cfg, seed, std::move(haptic_trace), std::move(se_trace)),
        reward_(std::move(reward)),
        satisfied_ttis_(static_cast<std::size_t>(cfg.pairs), 0) {
    reward_.validate();
  }

  World& world() { return world_; }
  const World& world() const { return world_; }
  const RewardConfig& reward_config() const { return reward_; }

  Observation observe() const {
    return make_observation(world_.snapshot(), world_.config().haptic, world_.config().video);
  }

  bool done() const { return world_.tti() >= world_.config().trial_ttis; }

  EnvStep step(const SlicingAction& action, const TtiObserver& on_tti = {}) {
    if (done()) throw std::logic_error("SlicingEnv::step: trial already finished");
    EnvStep out;
    const auto& cfg = world_.config();
    for (int k = 0; k < cfg.t_slice_ms && !done(); ++k) {
      world_.step(action.haptic_rbs);
      ++out.ttis;
      if (world_.tti() - 1 >= cfg.warmup_ttis) {
        ++measured_ttis_;
        bool all = true;
        const auto& sat = world_.satisfied();
        for (std::size_t p = 0; p < sat.size(); ++p) {
          satisfied_ttis_[p] += sat[p] ? 1 : 0;
          all = all && sat[p];
        }
        all_pairs_ttis_ += all ? 1 : 0;
      }
      if (on_tti) on_tti(world_);
    }
    ++decisions_;
    out.reward = total_reward(world_.snapshot(), reward_);
    out.obs = observe();
    out.done = done();
    reward_sum_ += out.reward.total;
    return out;
  }

  std::int64_t decisions() const { return decisions_; }
  std::int64_t measured_ttis() const { return measured_ttis_; }
  double mean_reward() const { return decisions_ ? reward_sum_ / static_cast<double>(decisions_) : 0.0; }

  // Mean over pairs of satisfied post-warmup TTIs / post-warmup TTIs.
  double satisfaction_rate() const {
    if (measured_ttis_ == 0) return 0.0;
    double sum = 0.0;
    for (auto s : satisfied_ttis_) sum += static_cast<double>(s) / static_cast<double>(measured_ttis_);
    return sum / static_cast<double>(satisfied_ttis_.size());
  }

  // Fraction of post-warmup TTIs in which every pair was satisfied at once.
  double all_pairs_satisfaction_rate() const {
    return measured_ttis_ ? static_cast<double>(all_pairs_ttis_) / static_cast<double>(measured_ttis_) : 0.0;
  }

  const std::vector<std::int64_t>& satisfied_ttis() const { return satisfied_ttis_; }

 private:
  World world_;
  RewardConfig reward_;
  std::vector<std::int64_t> satisfied_ttis_;
  std::int64_t all_pairs_ttis_ = 0;
  std::int64_t measured_ttis_ = 0;
  std::int64_t decisions_ = 0;
  double reward_sum_ = 0.0;
};

}  // namespace vhslice
