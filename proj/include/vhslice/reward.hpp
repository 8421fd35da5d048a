#pragma once

#include <cmath>
#include <string_view>

#include "vhslice/common.hpp"
#include "vhslice/ran.hpp"

namespace vhslice {

enum class RewardVariant { video_haptic, baseline };

inline std::string_view to_string(RewardVariant v) {
  return v == RewardVariant::video_haptic ? "vh" : "baseline";
}

inline RewardVariant parse_variant(std::string_view s) {
  if (s == "vh" || s == "video_haptic") return RewardVariant::video_haptic;
  if (s == "baseline") return RewardVariant::baseline;
  throw ConfigError("unknown reward variant '" + std::string(s) + "' (expected vh|baseline)");
}

// Penalty for a slice rate below its floor r0; 0 once met, -1 at zero rate.
inline double rate_reward(double rate, double rate_req) {
  return rate < rate_req ? -(rate_req - rate) / rate_req : 0.0;
}

// Penalty for loss above rho0, damped by the scale constant c.
inline double loss_reward(double loss, double loss_req, double c) {
  return loss > loss_req ? -(loss - loss_req) / (c * loss_req) : 0.0;
}

// Haptic/video desynchronization beyond tau_sync.
inline double video_latency_reward(double video_tau, double haptic_tau, double tau_sync) {
  const double skew = std::fabs(video_tau - haptic_tau);
  return skew > tau_sync ? -(skew - tau_sync) / tau_sync : 0.0;
}

// Latency of the worst-SE haptic user beyond tau0, normalized by tau_max.
inline double haptic_latency_reward(double worst_tau, double latency_req, double max_delay) {
  return worst_tau > latency_req ? -(worst_tau - latency_req) / max_delay : 0.0;
}

struct SliceThresholds {
  double rate_req_bps = 0.0;
  double loss_req = 0.0;
  double latency_req_ms = 0.0;
  double max_delay_ms = 0.0;
};

struct RewardConfig {
  RewardVariant variant = RewardVariant::video_haptic;
  SliceThresholds haptic{0.2e6, 1e-5, 10.0, 20.0};
  SliceThresholds video{4e6, 1e-1, 50.0, 100.0};
  double tau_sync_ms = 50.0;
  double c = 10.0;

  // Thresholds for a variant given the slice specs. The baseline judges the
  // haptic slice against the URLLC 1 ms target on its average latency and
  // carries no synchronization term.
  static RewardConfig make(RewardVariant variant, const SliceSpec& h, const SliceSpec& v) {
    RewardConfig rc;
    rc.variant = variant;
    rc.haptic = {h.rate_req_bps, h.loss_req, h.latency_req_ms, h.max_buffer_delay_ms};
    rc.video = {v.rate_req_bps, v.loss_req, v.latency_req_ms, v.max_buffer_delay_ms};
    if (variant == RewardVariant::baseline) rc.haptic.latency_req_ms = kUrllcLatencyMs;
    return rc;
  }

  static constexpr double kUrllcLatencyMs = 1.0;

  void validate() const {
    if (!(c > 0.0)) throw ConfigError("reward: c must be > 0");
    if (!(tau_sync_ms > 0.0)) throw ConfigError("reward: tau_sync_ms must be > 0");
    for (const auto* t : {&haptic, &video}) {
      if (!(t->rate_req_bps > 0.0) || !(t->loss_req > 0.0) || !(t->max_delay_ms > 0.0))
        throw ConfigError("reward: thresholds must be > 0");
      if (!(t->max_delay_ms > t->latency_req_ms))
        throw ConfigError("reward: max_delay_ms must exceed latency_req_ms");
    }
  }
};

struct RewardBreakdown {
  double rate_haptic = 0.0;
  double rate_video = 0.0;
  double loss_haptic = 0.0;
  double loss_video = 0.0;
  double latency_haptic = 0.0;
  double latency_video = 0.0;
  double total = 0.0;
};

// Slice-level quantities the reward reads from a KPI snapshot.
struct RewardInputs {
  SliceKpi haptic;
  SliceKpi video;
  double worst_haptic_latency_ms = 0.0;

  static RewardInputs from(const KpiSnapshot& s) {
    return {s.haptic, s.video, s.worst_haptic_hol_ms};
  }
};

inline RewardBreakdown total_reward(const RewardInputs& in, const RewardConfig& cfg) {
  RewardBreakdown r;
  r.rate_haptic = rate_reward(in.haptic.rate_bps, cfg.haptic.rate_req_bps);
  r.rate_video = rate_reward(in.video.rate_bps, cfg.video.rate_req_bps);
  r.loss_haptic = loss_reward(in.haptic.rho, cfg.haptic.loss_req, cfg.c);
  r.loss_video = loss_reward(in.video.rho, cfg.video.loss_req, cfg.c);
  if (cfg.variant == RewardVariant::video_haptic) {
    r.latency_haptic = haptic_latency_reward(in.worst_haptic_latency_ms,
                                             cfg.haptic.latency_req_ms, cfg.haptic.max_delay_ms);
    r.latency_video = video_latency_reward(in.video.tau_ms, in.haptic.tau_ms, cfg.tau_sync_ms);
  } else {
    r.latency_haptic = haptic_latency_reward(in.haptic.tau_ms, cfg.haptic.latency_req_ms,
                                             cfg.haptic.max_delay_ms);
    r.latency_video = 0.0;
  }
  r.total = r.rate_haptic + r.rate_video + r.loss_haptic + r.loss_video + r.latency_haptic +
            r.latency_video;
  return r;
}

inline RewardBreakdown total_reward(const KpiSnapshot& snap, const RewardConfig& cfg) {
  return total_reward(RewardInputs::from(snap), cfg);
}

}  // namespace vhslice
