#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "vhslice/vhslice.hpp"

namespace fs = std::filesystem;
using namespace vhslice;

namespace {

struct Options {
  std::string config;
  std::string out_dir;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::optional<int> t_slice;
  std::optional<std::string> variant;
  std::optional<std::int64_t> steps;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

std::string resolve_out_dir(const Options& o, const std::string& command) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (const char* env = std::getenv("VHSLICE_OUT_DIR"); env && *env) return (fs::path(env) / command).string();
  return (fs::path("runs") / command).string();
}

RunConfig resolve_config(const Options& o) {
  RunConfig rc = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.profile.empty()) {
    rc.profile = o.profile;
    rc.trial.training = training_profile(o.profile);
  }
  if (o.seed) rc.trial.train_seed = *o.seed;
  if (o.t_slice) rc.trial.scenario.t_slice_ms = *o.t_slice;
  if (o.variant) rc.trial.variant = parse_variant(*o.variant);
  if (o.steps) rc.trial.training.steps = *o.steps;
  rc.trial.validate();
  return rc;
}

void write_manifest(const RunManifest& m) {
  fs::create_directories(m.out_dir);
  save_manifest(m, (fs::path(m.out_dir) / "manifest.json").string());
}

int run_train(const RunManifest& m) {
  const auto& cfg = m.config.trial;
  write_manifest(m);
  const fs::path dir(m.out_dir);
  auto log = open_out(dir / "training_log.csv");
  log << "step,reward,critic1_loss,critic2_loss,actor_loss,lambda\n";
  const auto traces = TraceInputs::load(cfg.scenario);
  const auto every = std::max<std::int64_t>(1, cfg.training.steps / 20);
  auto agent = train_agent(cfg, traces, [&](const TrainingLogRow& r) {
    log << r.step << ',' << csv::format_exact(r.reward) << ',' << csv::format_exact(r.losses.critic1_loss) << ','
        << csv::format_exact(r.losses.critic2_loss) << ',' << csv::format_exact(r.losses.actor_loss) << ','
        << csv::format_exact(r.losses.lambda) << '\n';
    if (r.step % every == 0) std::cerr << "step " << r.step << "/" << cfg.training.steps << '\n';
  });
  agent->save((dir / "agent.json").string());
  std::cout << "trained " << cfg.training.steps << " steps (" << to_string(cfg.variant) << ", "
            << cfg.scenario.t_slice_ms << " ms)\n"
            << "checkpoint: " << (dir / "agent.json").string() << '\n';
  return 0;
}

int run_eval(const RunManifest& m, bool kpi_log) {
  const auto& cfg = m.config.trial;
  write_manifest(m);
  const fs::path dir(m.out_dir);
  const auto traces = TraceInputs::load(cfg.scenario);
  std::unique_ptr<SacAgent> agent;
  Policy policy;
  if (m.target.rfind("fixed:", 0) == 0) {
    int h = 0;
    if (!csv::parse_number(std::string_view(m.target).substr(6), h) || h < 0 || h > cfg.scenario.ran.n_rb)
      throw ConfigError("--fixed-split: must be in [0, n_rb]");
    policy = fixed_split_policy(h, cfg.scenario.ran.n_rb);
  } else {
    agent = std::make_unique<SacAgent>(kObservationDim, cfg.training.sac);
    agent->load(m.target);
    policy = agent_policy(*agent, cfg.scenario.ran.n_rb, cfg.scenario.rb_min);
  }
  SweepResult res;
  for (auto seed : cfg.eval_seeds) {
    TtiObserver observer;
    std::unique_ptr<std::ofstream> kpi, acct;
    std::unique_ptr<KpiLogWriter> writer;
    if (kpi_log) {
      kpi = std::make_unique<std::ofstream>(open_out(dir / ("kpi_" + std::to_string(seed) + ".csv")));
      acct = std::make_unique<std::ofstream>(open_out(dir / ("accounting_" + std::to_string(seed) + ".csv")));
      writer = std::make_unique<KpiLogWriter>(kpi.get(), acct.get());
      observer = [&](const World& w) { (*writer)(w); };
    }
    auto t = run_trial(cfg, seed, policy, traces, observer);
    std::cout << "seed " << seed << ": sr=" << csv::format_fixed(t.sr, 4)
              << " sr_all_pairs=" << csv::format_fixed(t.sr_all_pairs, 4)
              << " mean_reward=" << csv::format_fixed(t.mean_reward, 4) << '\n';
    res.rows.push_back({"eval", static_cast<double>(cfg.scenario.pairs), cfg.variant, cfg.scenario.t_slice_ms, t});
  }
  auto out = open_out(dir / "results.csv");
  write_results_csv(res, out);
  return 0;
}

void write_plots(const SweepResult& r, const fs::path& dir) {
  bool intervals = false;
  for (const auto& row : r.rows)
    if (row.t_slice_ms != r.rows.front().t_slice_ms) intervals = true;
  if (intervals) {
    open_out(dir / "intervals.svg") << plot::interval_chart(r);
    return;
  }
  std::vector<std::string> sweeps;
  for (const auto& row : r.rows)
    if (std::find(sweeps.begin(), sweeps.end(), row.sweep) == sweeps.end()) sweeps.push_back(row.sweep);
  for (const auto& s : sweeps) open_out(dir / (s + ".svg")) << plot::sweep_chart(r, s);
}

int run_sweep_cmd(const RunManifest& m, unsigned jobs) {
  const auto& cfg = m.config.trial;
  write_manifest(m);
  const fs::path dir(m.out_dir);
  const auto traces = TraceInputs::load(cfg.scenario);
  std::size_t done = 0;
  auto progress = [&](const SweepPoint& p) {
    std::cerr << "[" << ++done << "] " << p.sweep << "=" << p.param_value << " " << to_string(p.variant) << " "
              << p.t_slice_ms << " ms\n";
  };
  const auto pts = m.target == "intervals"
                       ? interval_study_points(cfg)
                       : sweep_points(parse_sweep(m.target), cfg,
                                      {RewardVariant::video_haptic, RewardVariant::baseline},
                                      {cfg.scenario.t_slice_ms});
  std::cerr << pts.size() << " points, " << jobs << " jobs\n";
  const auto res = run_points(pts, jobs, traces, progress);
  {
    auto out = open_out(dir / "results.csv");
    write_results_csv(res, out);
    auto sum = open_out(dir / "summary.csv");
    write_summary_csv(res, sum);
  }
  write_plots(res, dir);
  for (const auto& s : res.summarize())
    std::cout << s.sweep << '=' << s.param_value << ' ' << to_string(s.variant) << ' ' << s.t_slice_ms
              << " ms: sr=" << csv::format_fixed(s.sr_mean, 4) << " +- " << csv::format_fixed(s.sr_std, 4) << '\n';
  return 0;
}

int run_validate_trace(const std::string& path) {
  const auto trace = load_haptic_trace(path);
  const auto& s = trace.samples;
  const double duration = trace.duration_ms();
  std::cout << "samples: " << s.size() << '\n' << "duration_ms: " << csv::format_exact(duration) << '\n';
  std::cout << "total_bits: " << trace.total_bits() << '\n';
  if (duration > 0.0)
    std::cout << "mean_rate_kbps: " << csv::format_fixed(static_cast<double>(trace.total_bits()) / duration, 3)
              << '\n';
  if (s.size() > 1) {
    double lo = INFINITY, hi = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double d = s[i].timestamp_ms - s[i - 1].timestamp_ms;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    std::cout << "interarrival_ms: min " << csv::format_exact(lo) << " mean "
              << csv::format_fixed((s.back().timestamp_ms - s.front().timestamp_ms) / static_cast<double>(s.size() - 1), 3)
              << " max " << csv::format_exact(hi) << '\n';
  }
  return 0;
}

int run_plot(const std::string& results, const std::string& out_dir) {
  const auto r = plot::read_results_csv(results);
  if (r.rows.empty()) throw Error(results + ": no result rows");
  fs::create_directories(out_dir);
  write_plots(r, out_dir);
  std::cout << "plots written to " << out_dir << '\n';
  return 0;
}

int dispatch(const RunManifest& m, unsigned jobs, bool kpi_log) {
  if (m.command == "train") return run_train(m);
  if (m.command == "eval") return run_eval(m, kpi_log);
  if (m.command == "sweep") return run_sweep_cmd(m, jobs);
  throw ConfigError("manifest: unknown command '" + m.command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video-haptic RAN slicing simulator and SAC trainer"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "JSON configuration file");
    c->add_option("--seed", o.seed, "training seed");
    c->add_option("--t-slice", o.t_slice, "slicing interval in ms")->check(CLI::PositiveNumber);
    c->add_option("--variant", o.variant, "reward variant")->check(CLI::IsMember({"vh", "baseline"}));
    c->add_option("--profile", o.profile, "training preset")->check(CLI::IsMember({"full", "fast"}));
    c->add_option("--steps", o.steps, "training steps")->check(CLI::NonNegativeNumber);
    c->add_option("--out-dir", o.out_dir, "output directory (default $VHSLICE_OUT_DIR/<command> or runs/<command>)");
  };

  auto* train = app.add_subcommand("train", "train an agent and write a checkpoint");
  add_common(train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or a fixed split on the eval seeds");
  add_common(eval);
  std::string checkpoint;
  std::optional<int> fixed_split;
  bool kpi_log = false;
  auto* ck = eval->add_option("--checkpoint", checkpoint, "agent checkpoint from train");
  auto* fx = eval->add_option("--fixed-split", fixed_split, "haptic RBs of a constant split");
  ck->excludes(fx);
  eval->add_flag("--kpi-log", kpi_log, "write per-TTI KPI and accounting CSVs");

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep for both reward variants");
  add_common(sweep);
  std::string sweep_name;
  sweep->add_option("name", sweep_name, "users | se | fluctuation | intervals")
      ->required()
      ->check(CLI::IsMember({"users", "se", "fluctuation", "intervals"}));
  sweep->add_option("--jobs", o.jobs, "parallel workers")->check(CLI::PositiveNumber);

  auto* vt = app.add_subcommand("validate-trace", "check a haptic trace CSV and print statistics");
  std::string trace_path;
  vt->add_option("path", trace_path, "trace CSV")->required();

  auto* pl = app.add_subcommand("plot", "render SVG charts from a results CSV");
  std::string results_path;
  pl->add_option("results", results_path, "results CSV")->required();
  pl->add_option("--out-dir", o.out_dir, "output directory");

  auto* rerun = app.add_subcommand("rerun", "repeat the run recorded in a manifest");
  std::string manifest_path;
  rerun->add_option("manifest", manifest_path, "manifest.json")->required();
  rerun->add_option("--out-dir", o.out_dir, "output directory");
  rerun->add_option("--jobs", o.jobs, "parallel workers")->check(CLI::PositiveNumber);
  rerun->add_flag("--kpi-log", kpi_log, "write per-TTI KPI and accounting CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*vt) return run_validate_trace(trace_path);
    if (*pl) return run_plot(results_path, o.out_dir.empty() ? fs::path(results_path).parent_path().string()
                                                              : o.out_dir);
    RunManifest m;
    if (*rerun) {
      m = load_manifest(manifest_path);
      m.out_dir = resolve_out_dir(o, m.command + "_rerun");
      return dispatch(m, o.jobs, kpi_log);
    }
    m.config = resolve_config(o);
    if (*train) {
      m.command = "train";
    } else if (*eval) {
      m.command = "eval";
      if (fixed_split) {
        m.target = "fixed:" + std::to_string(*fixed_split);
      } else if (!checkpoint.empty()) {
        m.target = fs::absolute(checkpoint).string();
      } else {
        throw ConfigError("eval: need --checkpoint or --fixed-split");
      }
    } else {
      m.command = "sweep";
      m.target = sweep_name;
    }
    m.out_dir = resolve_out_dir(o, m.command == "sweep" ? "sweep_" + m.target : m.command);
    return dispatch(m, o.jobs, kpi_log);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
