#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vhslice/common.hpp"
#include "vhslice/csv.hpp"

namespace vhslice {

// One haptic or video packet. arrival_tti is the 1 ms slot it entered the buffer.
struct Packet {
  std::uint64_t id = 0;
  std::int64_t arrival_tti = 0;
  std::int64_t size_bits = 0;
  Modality modality = Modality::haptic;
};

inline constexpr std::int64_t kHapticPacketBits = 8 * 8;
inline constexpr std::int64_t kVideoPacketBits = 16667 * 8;
inline constexpr double kHapticPeriodMs = 1.0;
inline constexpr double kVideoPeriodMs = 100.0 / 3.0;
inline constexpr double kVideoJitterMs = 4.0;

struct TrafficSource {
  Modality modality = Modality::haptic;
  std::int64_t packet_size_bits = kHapticPacketBits;
  double mean_interarrival_ms = kHapticPeriodMs;
  double jitter_ms = 0.0;  // half-width of the uniform per-packet jitter
  double pd_reduction = 0.0;  // probability a haptic packet is suppressed
  double phase_ms = 0.0;  // offset of the nominal dispatch grid
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (packet_size_bits <= 0) throw ConfigError("traffic: packet_size_bits must be > 0");
    if (!(mean_interarrival_ms > 0.0))
      throw ConfigError("traffic: mean_interarrival_ms must be > 0");
    if (jitter_ms < 0.0 || jitter_ms >= mean_interarrival_ms)
      throw ConfigError("traffic: jitter_ms must lie in [0, mean_interarrival_ms)");
    if (pd_reduction < 0.0 || pd_reduction >= 1.0)
      throw ConfigError("traffic: pd_reduction must lie in [0, 1)");
    if (modality == Modality::video && pd_reduction != 0.0)
      throw ConfigError("traffic: pd_reduction applies to haptic sources only");
    if (phase_ms < 0.0) throw ConfigError("traffic: phase_ms must be >= 0");
  }
};

inline TrafficSource haptic_source(std::uint64_t seed, double pd_reduction = 0.0) {
  TrafficSource s;
  s.modality = Modality::haptic;
  s.packet_size_bits = kHapticPacketBits;
  s.mean_interarrival_ms = kHapticPeriodMs;
  s.pd_reduction = pd_reduction;
  s.rng_seed = seed;
  return s;
}

inline TrafficSource video_source(std::uint64_t seed, double phase_ms = 0.0) {
  TrafficSource s;
  s.modality = Modality::video;
  s.packet_size_bits = kVideoPacketBits;
  s.mean_interarrival_ms = kVideoPeriodMs;
  s.jitter_ms = kVideoJitterMs;
  s.phase_ms = phase_ms;
  s.rng_seed = seed;
  return s;
}

struct TraceSample {
  double timestamp_ms = 0.0;
  std::int64_t payload_bits = 0;
};

struct HapticTrace {
  std::vector<TraceSample> samples;
  std::string source_path;

  double duration_ms() const {
    return samples.empty() ? 0.0 : samples.back().timestamp_ms - samples.front().timestamp_ms;
  }
  std::int64_t total_bits() const {
    std::int64_t total = 0;
    for (const auto& s : samples) total += s.payload_bits;
    return total;
  }
};

// Parses a `timestamp_ms,payload_bits` CSV. Throws ParseError carrying the
// offending line number.
inline HapticTrace load_haptic_trace(const std::string& path) {
  HapticTrace trace;
  trace.source_path = path;
  csv::read_file(path, "timestamp_ms,payload_bits",
                 [&](const std::vector<std::string_view>& f, std::size_t line) {
                   if (f.size() != 2) throw ParseError(path, line, "expected 2 fields");
                   TraceSample s;
                   if (!csv::parse_number(f[0], s.timestamp_ms) || !std::isfinite(s.timestamp_ms))
                     throw ParseError(path, line, "bad timestamp_ms");
                   if (!csv::parse_number(f[1], s.payload_bits))
                     throw ParseError(path, line, "bad payload_bits");
                   if (s.payload_bits <= 0)
                     throw ParseError(path, line, "payload_bits must be > 0");
                   if (!trace.samples.empty() &&
                       s.timestamp_ms <= trace.samples.back().timestamp_ms)
                     throw ParseError(path, line, "non-monotone timestamp");
                   trace.samples.push_back(s);
                 });
  if (trace.samples.empty()) throw ParseError(path, 1, "trace has no samples");
  return trace;
}

// Stateful packet generator for one source. Either synthesizes arrivals from a
// TrafficSource or replays a HapticTrace (looping it when the run outlasts it).
// Must be advanced with non-decreasing tti.
class TrafficGenerator {
 public:
  explicit TrafficGenerator(TrafficSource source, std::uint64_t id_base = 0)
      : source_(std::move(source)), rng_(source_.rng_seed), next_id_(id_base) {
    source_.validate();
    schedule_next();
  }

  TrafficGenerator(std::shared_ptr<const HapticTrace> trace, std::int64_t offset_tti,
                   std::uint64_t id_base = 0)
      : trace_(std::move(trace)), trace_offset_(offset_tti), next_id_(id_base) {
    if (!trace_ || trace_->samples.empty())
      throw ConfigError("traffic: trace replay needs a non-empty trace");
    source_.modality = Modality::haptic;
    const auto first = std::llround(trace_->samples.front().timestamp_ms);
    const auto last = std::llround(trace_->samples.back().timestamp_ms);
    trace_period_ = std::max<std::int64_t>(1, last - first + 1);
    trace_first_ = first;
    schedule_next();
  }

  const TrafficSource& source() const { return source_; }
  bool is_replay() const { return trace_ != nullptr; }

  // Appends to `out` every packet whose dispatch slot is <= tti.
  void generate(std::int64_t tti, std::vector<Packet>& out) {
    if (tti < 0) throw std::invalid_argument("generate: tti must be >= 0");
    if (tti < last_tti_) throw std::invalid_argument("generate: tti went backwards");
    last_tti_ = tti;
    while (pending_tti_ <= tti) {
      if (!pending_suppressed_)
        out.push_back(Packet{next_id_++, pending_tti_, pending_bits_, source_.modality});
      schedule_next();
    }
  }

  std::vector<Packet> generate_arrivals(std::int64_t tti) {
    std::vector<Packet> out;
    generate(tti, out);
    return out;
  }

 private:
  void schedule_next() {
    if (trace_) {
      const auto n = static_cast<std::int64_t>(trace_->samples.size());
      const auto& s = trace_->samples[static_cast<std::size_t>(index_ % n)];
      const std::int64_t loop = index_ / n;
      std::int64_t t = std::llround(s.timestamp_ms) - trace_first_ + loop * trace_period_ +
                       trace_offset_;
      t = std::max(t, last_dispatch_);
      pending_tti_ = t;
      pending_bits_ = s.payload_bits;
      pending_suppressed_ = false;
    } else {
      const double nominal =
          source_.phase_ms + static_cast<double>(index_) * source_.mean_interarrival_ms;
      double jitter = 0.0;
      if (source_.jitter_ms > 0.0) jitter = uniform(rng_, -source_.jitter_ms, source_.jitter_ms);
      std::int64_t t = std::llround(nominal + jitter);
      t = std::max<std::int64_t>({t, last_dispatch_, 0});
      pending_tti_ = t;
      pending_bits_ = source_.packet_size_bits;
      pending_suppressed_ = source_.pd_reduction > 0.0 && uniform01(rng_) < source_.pd_reduction;
    }
    last_dispatch_ = pending_tti_;
    ++index_;
  }

  TrafficSource source_;
  std::shared_ptr<const HapticTrace> trace_;
  std::int64_t trace_offset_ = 0;
  std::int64_t trace_period_ = 1;
  std::int64_t trace_first_ = 0;
  Rng rng_;
  std::uint64_t next_id_ = 0;
  std::int64_t index_ = 0;
  std::int64_t last_dispatch_ = 0;
  std::int64_t last_tti_ = 0;
  std::int64_t pending_tti_ = 0;
  std::int64_t pending_bits_ = 0;
  bool pending_suppressed_ = false;
};

}  // namespace vhslice
