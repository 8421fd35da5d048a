#pragma once

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "vhslice/common.hpp"
#include "vhslice/experiment.hpp"

#ifndef VHSLICE_VERSION
#define VHSLICE_VERSION "0.1.0"
#endif

// JSON configuration files and run manifests. Every field is optional and
// falls back to the library default; unknown keys are rejected so typos fail
// loudly. Errors name the offending field by its dotted path.
namespace vhslice {

using Json = nlohmann::json;

inline constexpr std::string_view kVersion = VHSLICE_VERSION;

namespace detail {

class FieldReader {
 public:
  FieldReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    out = convert<T>(*it, field(key));
  }

  bool has(const char* key) const { return j_.contains(key); }

  FieldReader child(const char* key) {
    seen_.insert(key);
    return FieldReader(j_.at(key), field(key));
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key().c_str()) + ": unknown field");
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  template <typename T>
  static T convert(const Json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
        if (v.get<std::int64_t>() < 0) throw ConfigError(path + ": must be >= 0");
        return static_cast<T>(v.get<std::int64_t>());
      } else {
        const auto x = v.get<std::int64_t>();
        if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
          throw ConfigError(path + ": out of range");
        return static_cast<T>(x);
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      if (v.is_null()) return std::nullopt;
      return convert<double>(v, path);
    } else {
      if (!v.is_array()) throw ConfigError(path + ": expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

}  // namespace detail

inline std::string_view to_string(IntraSliceScheduler s) {
  return s == IntraSliceScheduler::proportional ? "proportional" : "round_robin";
}

inline IntraSliceScheduler parse_scheduler(std::string_view s) {
  if (s == "proportional") return IntraSliceScheduler::proportional;
  if (s == "round_robin") return IntraSliceScheduler::round_robin;
  throw ConfigError("unknown scheduler '" + std::string(s) + "' (expected proportional|round_robin)");
}

// Named training presets. "full" keeps the large network and step budget;
// "fast" is a reduced setting that fits a single CPU core.
inline TrainingConfig training_profile(std::string_view name) {
  TrainingConfig t;
  if (name == "full") return t;
  if (name == "fast") {
    t.steps = 50'000;
    t.learning_starts = 1'000;
    t.reward_floor = -10.0;
    t.sac.hidden = {64, 64};
    t.sac.batch_size = 256;
    t.sac.learning_rate = 3e-4;
    return t;
  }
  throw ConfigError("training.profile: unknown profile '" + std::string(name) + "' (expected full|fast)");
}

// Full configuration plus the training preset it started from.
struct RunConfig {
  TrialConfig trial;
  std::string profile = "full";
};

namespace detail {

inline void read_slice(FieldReader r, SliceSpec& s) {
  r.get("latency_req_ms", s.latency_req_ms);
  r.get("loss_req", s.loss_req);
  r.get("rate_req_bps", s.rate_req_bps);
  r.get("max_buffer_delay_ms", s.max_buffer_delay_ms);
  r.finish();
}

inline void read_scenario(FieldReader r, ScenarioConfig& s) {
  r.get("pairs", s.pairs);
  r.get("mean_se", s.mean_se);
  r.get("fluctuation", s.fluctuation);
  r.get("correlation_ms", s.correlation_ms);
  r.get("t_slice_ms", s.t_slice_ms);
  r.get("trial_ttis", s.trial_ttis);
  r.get("warmup_ttis", s.warmup_ttis);
  r.get("pd_reduction", s.pd_reduction);
  r.get("rb_min", s.rb_min);
  std::string sched(to_string(s.scheduler));
  r.get("scheduler", sched);
  try {
    s.scheduler = parse_scheduler(sched);
  } catch (const ConfigError& e) {
    throw ConfigError(r.field("scheduler") + ": " + e.what());
  }
  r.get("haptic_trace", s.haptic_trace);
  r.get("se_trace", s.se_trace);
  if (r.has("ran")) {
    auto ran = r.child("ran");
    ran.get("bandwidth_hz", s.ran.bandwidth_hz);
    ran.get("n_rb", s.ran.n_rb);
    ran.get("tti_ms", s.ran.tti_ms);
    ran.get("kpi_window_ttis", s.ran.kpi_window_ttis);
    ran.finish();
  }
  if (r.has("haptic")) read_slice(r.child("haptic"), s.haptic);
  if (r.has("video")) read_slice(r.child("video"), s.video);
  r.finish();
}

inline void read_sac(FieldReader r, SacConfig& s) {
  r.get("hidden", s.hidden);
  r.get("batch_size", s.batch_size);
  r.get("learning_rate", s.learning_rate);
  r.get("gamma", s.gamma);
  r.get("polyak_rate", s.polyak_rate);
  r.get("buffer_capacity", s.buffer_capacity);
  r.get("auto_entropy", s.auto_entropy);
  r.get("initial_lambda", s.initial_lambda);
  r.get("target_entropy", s.target_entropy);
  r.get("log_std_min", s.log_std_min);
  r.get("log_std_max", s.log_std_max);
  r.finish();
}

}  // namespace detail

// Parses a config object; throws ConfigError naming the offending field.
inline RunConfig run_config_from_json(const Json& j) {
  RunConfig rc;
  detail::FieldReader r(j, "");
  auto& t = rc.trial;
  if (r.has("training")) {
    auto tr = r.child("training");
    tr.get("profile", rc.profile);
    t.training = training_profile(rc.profile);
    tr.get("steps", t.training.steps);
    tr.get("learning_starts", t.training.learning_starts);
    tr.get("reward_floor", t.training.reward_floor);
    if (tr.has("sac")) detail::read_sac(tr.child("sac"), t.training.sac);
    tr.finish();
  }
  if (r.has("scenario")) detail::read_scenario(r.child("scenario"), t.scenario);
  std::string variant(to_string(t.variant));
  r.get("variant", variant);
  try {
    t.variant = parse_variant(variant);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("variant: ") + e.what());
  }
  if (r.has("reward")) {
    auto rw = r.child("reward");
    rw.get("c", t.reward_c);
    rw.get("tau_sync_ms", t.tau_sync_ms);
    rw.finish();
  }
  r.get("train_seed", t.train_seed);
  r.get("eval_seeds", t.eval_seeds);
  r.finish();
  t.validate();
  return rc;
}

inline Json to_json(const RunConfig& rc) {
  const auto& t = rc.trial;
  const auto& s = t.scenario;
  const auto& sac = t.training.sac;
  auto slice = [](const SliceSpec& x) {
    return Json{{"latency_req_ms", x.latency_req_ms},
                {"loss_req", x.loss_req},
                {"rate_req_bps", x.rate_req_bps},
                {"max_buffer_delay_ms", x.max_buffer_delay_ms}};
  };
  Json j;
  j["scenario"] = {{"pairs", s.pairs},
                   {"mean_se", s.mean_se},
                   {"fluctuation", s.fluctuation},
                   {"correlation_ms", s.correlation_ms},
                   {"t_slice_ms", s.t_slice_ms},
                   {"trial_ttis", s.trial_ttis},
                   {"warmup_ttis", s.warmup_ttis},
                   {"pd_reduction", s.pd_reduction},
                   {"rb_min", s.rb_min},
                   {"scheduler", to_string(s.scheduler)},
                   {"haptic_trace", s.haptic_trace},
                   {"se_trace", s.se_trace},
                   {"ran",
                    {{"bandwidth_hz", s.ran.bandwidth_hz},
                     {"n_rb", s.ran.n_rb},
                     {"tti_ms", s.ran.tti_ms},
                     {"kpi_window_ttis", s.ran.kpi_window_ttis}}},
                   {"haptic", slice(s.haptic)},
                   {"video", slice(s.video)}};
  j["variant"] = to_string(t.variant);
  j["reward"] = {{"c", t.reward_c}, {"tau_sync_ms", t.tau_sync_ms}};
  j["training"] = {{"profile", rc.profile},
                   {"steps", t.training.steps},
                   {"learning_starts", t.training.learning_starts},
                   {"reward_floor", t.training.reward_floor ? Json(*t.training.reward_floor) : Json(nullptr)},
                   {"sac",
                    {{"hidden", sac.hidden},
                     {"batch_size", sac.batch_size},
                     {"learning_rate", sac.learning_rate},
                     {"gamma", sac.gamma},
                     {"polyak_rate", sac.polyak_rate},
                     {"buffer_capacity", sac.buffer_capacity},
                     {"auto_entropy", sac.auto_entropy},
                     {"initial_lambda", sac.initial_lambda},
                     {"target_entropy", sac.target_entropy},
                     {"log_std_min", sac.log_std_min},
                     {"log_std_max", sac.log_std_max}}}};
  j["train_seed"] = t.train_seed;
  j["eval_seeds"] = t.eval_seeds;
  return j;
}

inline Json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  try {
    return run_config_from_json(parse_json_file(path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

// Everything needed to rerun a command bit-for-bit.
struct RunManifest {
  std::string version{kVersion};
  std::string command;      // train | eval | sweep
  std::string target;       // sweep name, if any
  RunConfig config;
  std::string out_dir;
};

inline Json to_json(const RunManifest& m) {
  return Json{{"format", "vhslice-manifest-v1"},
              {"version", m.version},
              {"command", m.command},
              {"target", m.target},
              {"out_dir", m.out_dir},
              {"config", to_json(m.config)}};
}

inline RunManifest manifest_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "vhslice-manifest-v1")
    throw ConfigError("manifest: missing or unsupported format tag");
  RunManifest m;
  detail::FieldReader r(j, "manifest");
  std::string format;
  r.get("format", format);
  r.get("version", m.version);
  r.get("command", m.command);
  r.get("target", m.target);
  r.get("out_dir", m.out_dir);
  if (!r.has("config")) throw ConfigError("manifest.config: missing");
  r.child("config");
  r.finish();
  m.config = run_config_from_json(j.at("config"));
  return m;
}

inline void save_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json(m).dump(2) << '\n';
}

inline RunManifest load_manifest(const std::string& path) {
  try {
    return manifest_from_json(parse_json_file(path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

}  // namespace vhslice
