#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vhslice/agent.hpp"
#include "vhslice/common.hpp"
#include "vhslice/csv.hpp"
#include "vhslice/reward.hpp"
#include "vhslice/world.hpp"

namespace vhslice {

struct TrainingConfig {
  std::int64_t steps = 200'000;         // environment decisions
  std::int64_t learning_starts = 1'000;  // uniform random actions before this
  std::optional<double> reward_floor;     // rewards stored for learning are clipped below at this
  SacConfig sac;

  void validate() const {
    if (steps < 0) throw ConfigError("training.steps: must be >= 0");
    if (learning_starts < 0) throw ConfigError("training.learning_starts: must be >= 0");
    sac.validate();
  }
};

struct TrialConfig {
  ScenarioConfig scenario;
  RewardVariant variant = RewardVariant::video_haptic;
  double reward_c = 10.0;
  double tau_sync_ms = 50.0;
  TrainingConfig training;
  std::uint64_t train_seed = 1;
  std::vector<std::uint64_t> eval_seeds{1001, 1002, 1003};

  void validate() const {
    scenario.validate();
    training.validate();
    if (!(reward_c > 0.0)) throw ConfigError("reward.c: must be > 0");
    if (!(tau_sync_ms > 0.0)) throw ConfigError("reward.tau_sync_ms: must be > 0");
    if (eval_seeds.empty()) throw ConfigError("eval_seeds: need at least one seed");
  }

  RewardConfig reward_config() const { return reward_config(variant); }
  RewardConfig reward_config(RewardVariant v) const {
    RewardConfig rc = RewardConfig::make(v, scenario.haptic, scenario.video);
    rc.c = reward_c;
    rc.tau_sync_ms = tau_sync_ms;
    return rc;
  }
};

// Optional replay inputs shared read-only by every world of a run.
struct TraceInputs {
  std::shared_ptr<const HapticTrace> haptic;
  std::shared_ptr<const SeTrace> se;

  static TraceInputs load(const ScenarioConfig& cfg) {
    TraceInputs t;
    if (!cfg.haptic_trace.empty())
      t.haptic = std::make_shared<const HapticTrace>(load_haptic_trace(cfg.haptic_trace));
    if (!cfg.se_trace.empty()) t.se = std::make_shared<const SeTrace>(load_se_trace(cfg.se_trace));
    return t;
  }
};

using Policy = std::function<SlicingAction(const Observation&)>;

inline Policy fixed_split_policy(int haptic_rbs, int n_rb) {
  return [=](const Observation&) { return SlicingAction{0.0, haptic_rbs, n_rb - haptic_rbs}; };
}

// Deterministic actor (tanh of the mean) mapped onto an RB split.
inline Policy agent_policy(const SacAgent& agent, int n_rb, int rb_min) {
  return [&agent, n_rb, rb_min](const Observation& obs) {
    Rng unused(0);
    return map_action(agent.act(obs, SacAgent::Mode::deterministic, unused), n_rb, rb_min);
  };
}

struct TrialResult {
  std::uint64_t seed = 0;
  double sr = 0.0;
  double sr_all_pairs = 0.0;
  double mean_reward = 0.0;
  std::int64_t decisions = 0;
  std::vector<double> pair_sr;
};

// Per-TTI KPI log rows: tti,slice,user,tau_ms,rho,rate_bps,buffer_bits,se,satisfied
// (satisfied is the owning pair's flag). Also the per-link bit accounting used
// for conservation replay: tti,link,arrived_bits,sent_bits,discarded_bits,buffer_bits.
class KpiLogWriter {
 public:
  KpiLogWriter(std::ostream* kpi, std::ostream* accounting) : kpi_(kpi), acct_(accounting) {
    if (kpi_) *kpi_ << "tti,slice,user,tau_ms,rho,rate_bps,buffer_bits,se,satisfied\n";
    if (acct_) *acct_ << "tti,link,arrived_bits,sent_bits,discarded_bits,buffer_bits\n";
  }

  void operator()(const World& w) {
    const auto tti = w.tti() - 1;
    const auto& snap = w.snapshot();
    const auto& sat = w.satisfied();
    const auto& steps = w.last_step();
    for (std::size_t i = 0; i < w.ran().num_links(); ++i) {
      const auto& l = w.ran().link(i);
      const auto& k = snap.links[i];
      if (kpi_) {
        *kpi_ << tti << ',' << to_string(l.slice) << ',' << l.user << ','
              << csv::format_exact(k.tau_ms) << ',' << csv::format_exact(k.rho) << ','
              << csv::format_exact(k.rate_bps) << ',' << l.buffer_bits << ','
              << csv::format_exact(k.se) << ',' << (sat[static_cast<std::size_t>(l.pair)] ? 1 : 0)
              << '\n';
      }
      if (acct_) {
        const auto& s = steps[i];
        *acct_ << tti << ',' << i << ',' << s.arrived_bits << ',' << s.bits_sent << ','
               << s.bits_discarded << ',' << s.buffer_after << '\n';
      }
    }
  }

 private:
  std::ostream* kpi_;
  std::ostream* acct_;
};

// Runs one evaluation trial of scenario.trial_ttis TTIs; the policy is
// consulted every t_slice_ms TTIs.
inline TrialResult run_trial(const TrialConfig& cfg, std::uint64_t seed, const Policy& policy,
                             const TraceInputs& traces = {}, const TtiObserver& on_tti = {}) {
  SlicingEnv env(cfg.scenario, cfg.reward_config(), seed, traces.haptic, traces.se);
  Observation obs = env.observe();
  while (!env.done()) obs = env.step(policy(obs), on_tti).obs;
  TrialResult r;
  r.seed = seed;
  r.sr = env.satisfaction_rate();
  r.sr_all_pairs = env.all_pairs_satisfaction_rate();
  r.mean_reward = env.mean_reward();
  r.decisions = env.decisions();
  for (auto s : env.satisfied_ttis())
    r.pair_sr.push_back(static_cast<double>(s) / static_cast<double>(env.measured_ttis()));
  return r;
}

struct TrainingLogRow {
  std::int64_t step = 0;
  double reward = 0.0;
  LossReport losses;
};

using TrainingLogFn = std::function<void(const TrainingLogRow&)>;

// Trains a SAC agent on freshly seeded worlds of cfg.scenario, one gradient
// update per decision once the buffer holds a batch and learning_starts has
// passed. Worlds are chained into one non-terminating episode (done = false).
inline std::unique_ptr<SacAgent> train_agent(const TrialConfig& cfg, const TraceInputs& traces = {},
                                             const TrainingLogFn& log = {}) {
  cfg.validate();
  SacConfig sac = cfg.training.sac;
  sac.seed = derive_seed(cfg.train_seed, 1);
  auto agent = std::make_unique<SacAgent>(kObservationDim, sac);
  Rng update_rng(derive_seed(cfg.train_seed, 2));
  Rng action_rng(derive_seed(cfg.train_seed, 3));
  const int n_rb = cfg.scenario.ran.n_rb;
  const RewardConfig rc = cfg.reward_config();

  std::int64_t step = 0;
  std::uint64_t episode = 0;
  while (step < cfg.training.steps) {
    SlicingEnv env(cfg.scenario, rc, derive_seed(cfg.train_seed, 0x10000 + episode++), traces.haptic,
                   traces.se);
    Observation obs = env.observe();
    while (!env.done() && step < cfg.training.steps) {
      const double raw = step < cfg.training.learning_starts
                             ? uniform(action_rng, -1.0, 1.0)
                             : agent->act(obs, SacAgent::Mode::stochastic, action_rng);
      const auto out = env.step(map_action(raw, n_rb, cfg.scenario.rb_min));
      const double r = cfg.training.reward_floor ? std::max(out.reward.total, *cfg.training.reward_floor)
                                                 : out.reward.total;
      agent->store(Transition{{obs.begin(), obs.end()}, raw, r,
                              {out.obs.begin(), out.obs.end()}, false});
      obs = out.obs;
      ++step;
      TrainingLogRow row{step, out.reward.total, {}};
      if (step >= cfg.training.learning_starts && agent->buffer().size() >= sac.batch_size) {
        row.losses = agent->update(update_rng);
      } else {
        row.losses.lambda = agent->lambda();
      }
      if (log) log(row);
    }
  }
  return agent;
}

inline std::vector<TrialResult> evaluate(const TrialConfig& cfg, const Policy& policy,
                                         const TraceInputs& traces = {}) {
  std::vector<TrialResult> out;
  for (auto seed : cfg.eval_seeds) out.push_back(run_trial(cfg, seed, policy, traces));
  return out;
}

enum class SweepKind { users, se, fluctuation };

inline std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::users: return "users";
    case SweepKind::se: return "se";
    case SweepKind::fluctuation: return "fluctuation";
  }
  return "?";
}

inline SweepKind parse_sweep(std::string_view s) {
  if (s == "users") return SweepKind::users;
  if (s == "se") return SweepKind::se;
  if (s == "fluctuation") return SweepKind::fluctuation;
  throw ConfigError("unknown sweep '" + std::string(s) + "' (expected users|se|fluctuation|intervals)");
}

// Grid of the swept parameter with the other two pinned.
inline std::vector<double> sweep_values(SweepKind k) {
  switch (k) {
    case SweepKind::users: return {10, 15, 20, 25};
    case SweepKind::se: return {4.5, 5.0, 5.5};
    case SweepKind::fluctuation: return {0.0, 0.25, 0.5};
  }
  return {};
}

inline TrialConfig apply_sweep_point(TrialConfig cfg, SweepKind k, double value) {
  auto& s = cfg.scenario;
  s.pairs = 20;
  s.mean_se = 5.0;
  s.fluctuation = 0.25;
  switch (k) {
    case SweepKind::users: s.pairs = static_cast<int>(value); break;
    case SweepKind::se: s.mean_se = value; break;
    case SweepKind::fluctuation: s.fluctuation = value; break;
  }
  return cfg;
}

struct SweepPoint {
  std::string sweep;
  double param_value = 0.0;
  RewardVariant variant = RewardVariant::video_haptic;
  int t_slice_ms = 1;
  TrialConfig config;
};

struct ResultRow {
  std::string sweep;
  double param_value = 0.0;
  RewardVariant variant = RewardVariant::video_haptic;
  int t_slice_ms = 1;
  TrialResult trial;
};

struct SweepResult {
  std::vector<ResultRow> rows;

  struct Summary {
    std::string sweep;
    double param_value;
    RewardVariant variant;
    int t_slice_ms;
    double sr_mean, sr_std, sr_all_pairs_mean, reward_mean;
    std::size_t seeds;
  };

  // Mean and sample std over seeds for every (sweep, value, variant, t_slice).
  std::vector<Summary> summarize() const {
    std::vector<Summary> out;
    for (std::size_t i = 0; i < rows.size();) {
      std::size_t j = i;
      while (j < rows.size() && rows[j].sweep == rows[i].sweep && rows[j].param_value == rows[i].param_value &&
             rows[j].variant == rows[i].variant && rows[j].t_slice_ms == rows[i].t_slice_ms)
        ++j;
      Summary s{rows[i].sweep, rows[i].param_value, rows[i].variant, rows[i].t_slice_ms, 0, 0, 0, 0, j - i};
      for (std::size_t k = i; k < j; ++k) {
        s.sr_mean += rows[k].trial.sr;
        s.sr_all_pairs_mean += rows[k].trial.sr_all_pairs;
        s.reward_mean += rows[k].trial.mean_reward;
      }
      const double n = static_cast<double>(j - i);
      s.sr_mean /= n;
      s.sr_all_pairs_mean /= n;
      s.reward_mean /= n;
      if (j - i > 1) {
        double ss = 0.0;
        for (std::size_t k = i; k < j; ++k) ss += (rows[k].trial.sr - s.sr_mean) * (rows[k].trial.sr - s.sr_mean);
        s.sr_std = std::sqrt(ss / (n - 1.0));
      }
      out.push_back(s);
      i = j;
    }
    return out;
  }
};

inline void write_results_csv(const SweepResult& r, std::ostream& out) {
  out << "sweep,param_value,variant,t_slice_ms,seed,sr,mean_reward\n";
  for (const auto& row : r.rows)
    out << row.sweep << ',' << csv::format_exact(row.param_value) << ',' << to_string(row.variant) << ','
        << row.t_slice_ms << ',' << row.trial.seed << ',' << csv::format_fixed(row.trial.sr, 6) << ','
        << csv::format_fixed(row.trial.mean_reward, 6) << '\n';
}

inline void write_summary_csv(const SweepResult& r, std::ostream& out) {
  out << "sweep,param_value,variant,t_slice_ms,seeds,sr_mean,sr_std,sr_all_pairs_mean,mean_reward\n";
  for (const auto& s : r.summarize())
    out << s.sweep << ',' << csv::format_exact(s.param_value) << ',' << to_string(s.variant) << ','
        << s.t_slice_ms << ',' << s.seeds << ',' << csv::format_fixed(s.sr_mean, 6) << ','
        << csv::format_fixed(s.sr_std, 6) << ',' << csv::format_fixed(s.sr_all_pairs_mean, 6) << ','
        << csv::format_fixed(s.reward_mean, 6) << '\n';
}

// Trains one agent per point and evaluates it on every eval seed. Points are
// independent and run on up to `jobs` threads; row order follows `points`.
inline SweepResult run_points(const std::vector<SweepPoint>& points, unsigned jobs,
                              const TraceInputs& traces = {},
                              const std::function<void(const SweepPoint&)>& on_done = {}) {
  std::vector<std::vector<ResultRow>> per_point(points.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        const auto& p = points[i];
        auto agent = train_agent(p.config, traces);
        const auto policy = agent_policy(*agent, p.config.scenario.ran.n_rb, p.config.scenario.rb_min);
        for (const auto& t : evaluate(p.config, policy, traces))
          per_point[i].push_back({p.sweep, p.param_value, p.variant, p.t_slice_ms, t});
        std::lock_guard lock(done_mu);
        if (on_done) on_done(p);
      } catch (...) {
        std::lock_guard lock(done_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, points.size()))));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  SweepResult out;
  for (auto& v : per_point)
    for (auto& row : v) out.rows.push_back(std::move(row));
  return out;
}

inline std::vector<SweepPoint> sweep_points(SweepKind kind, const TrialConfig& base,
                                            const std::vector<RewardVariant>& variants,
                                            const std::vector<int>& t_slices) {
  std::vector<SweepPoint> pts;
  for (double v : sweep_values(kind))
    for (auto variant : variants)
      for (int t : t_slices) {
        SweepPoint p{std::string(to_string(kind)), v, variant, t, apply_sweep_point(base, kind, v)};
        p.config.variant = variant;
        p.config.scenario.t_slice_ms = t;
        pts.push_back(std::move(p));
      }
  return pts;
}

// One parameter sweep, both reward variants, at the base config's interval.
inline SweepResult run_sweep(SweepKind kind, const TrialConfig& base, unsigned jobs,
                             const TraceInputs& traces = {}) {
  return run_points(sweep_points(kind, base, {RewardVariant::video_haptic, RewardVariant::baseline},
                                 {base.scenario.t_slice_ms}),
                    jobs, traces);
}

inline const std::vector<int>& interval_grid() {
  static const std::vector<int> grid{1, 10, 50};
  return grid;
}

// All three sweeps with the video-haptic reward at 1, 10 and 50 ms slicing
// intervals, plus the baseline at the base interval for reference.
inline std::vector<SweepPoint> interval_study_points(const TrialConfig& base) {
  std::vector<SweepPoint> pts;
  for (auto kind : {SweepKind::users, SweepKind::se, SweepKind::fluctuation}) {
    auto vh = sweep_points(kind, base, {RewardVariant::video_haptic}, interval_grid());
    auto bl = sweep_points(kind, base, {RewardVariant::baseline}, {base.scenario.t_slice_ms});
    pts.insert(pts.end(), vh.begin(), vh.end());
    pts.insert(pts.end(), bl.begin(), bl.end());
  }
  return pts;
}

inline SweepResult run_interval_study(const TrialConfig& base, unsigned jobs, const TraceInputs& traces = {}) {
  return run_points(interval_study_points(base), jobs, traces);
}

}  // namespace vhslice
