#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vhslice/channel.hpp"
#include "vhslice/common.hpp"
#include "vhslice/traffic.hpp"

namespace vhslice {

// Service requirements of one slice. Thresholds are inclusive.
struct SliceSpec {
  Modality modality = Modality::haptic;
  double latency_req_ms = 10.0;      // tau_0
  double loss_req = 1e-5;            // rho_0
  double rate_req_bps = 0.2e6;       // r_0
  double max_buffer_delay_ms = 20.0;  // tau_max, discard deadline

  static SliceSpec haptic() { return {Modality::haptic, 10.0, 1e-5, 0.2e6, 20.0}; }
  static SliceSpec video() { return {Modality::video, 50.0, 1e-1, 4e6, 100.0}; }

  void validate() const {
    if (!(latency_req_ms > 0.0)) throw ConfigError("slice: latency_req_ms must be > 0");
    if (!(loss_req > 0.0) || loss_req > 1.0) throw ConfigError("slice: loss_req must be in (0, 1]");
    if (!(rate_req_bps > 0.0)) throw ConfigError("slice: rate_req_bps must be > 0");
    if (!(max_buffer_delay_ms > latency_req_ms))
      throw ConfigError("slice: max_buffer_delay_ms must exceed latency_req_ms");
  }
};

struct RanConfig {
  double bandwidth_hz = 20e6;
  int n_rb = 100;
  double tti_ms = 1.0;
  int kpi_window_ttis = 200;

  // Bits one RB carries in one TTI per bit/s/Hz of SE: 200 kHz * 1 ms = 200.
  double bits_per_rb_per_se() const { return bandwidth_hz / n_rb * tti_ms / 1000.0; }

  void validate() const {
    if (!(bandwidth_hz > 0.0)) throw ConfigError("ran: bandwidth_hz must be > 0");
    if (n_rb <= 0) throw ConfigError("ran: n_rb must be > 0");
    if (tti_ms != 1.0) throw ConfigError("ran: only a 1 ms TTI is supported");
    if (kpi_window_ttis <= 0) throw ConfigError("ran: kpi_window_ttis must be > 0");
  }
};

// Integer bit budget of n RBs at the given SE for one TTI.
inline std::int64_t rb_capacity_bits(const RanConfig& cfg, int n_rb, double se) {
  return static_cast<std::int64_t>(std::floor(n_rb * cfg.bits_per_rb_per_se() * se));
}

// Sliding window of per-TTI delivery/discard counts for one link.
class KpiWindow {
 public:
  struct Slot {
    std::int64_t delivered = 0;
    std::int64_t latency_sum_ms = 0;  // delivered latency plus discarded waiting time
    std::int64_t discarded = 0;
    std::int64_t delivered_bits = 0;
  };

  explicit KpiWindow(int length = 200) : slots_(static_cast<std::size_t>(length)) {}

  void push(const Slot& s) {
    auto& old = slots_[head_];
    if (filled_ == slots_.size()) {
      sum_.delivered -= old.delivered;
      sum_.latency_sum_ms -= old.latency_sum_ms;
      sum_.discarded -= old.discarded;
      sum_.delivered_bits -= old.delivered_bits;
    } else {
      ++filled_;
    }
    old = s;
    sum_.delivered += s.delivered;
    sum_.latency_sum_ms += s.latency_sum_ms;
    sum_.discarded += s.discarded;
    sum_.delivered_bits += s.delivered_bits;
    head_ = (head_ + 1) % slots_.size();
  }

  const Slot& sum() const { return sum_; }
  std::size_t filled() const { return filled_; }

 private:
  std::vector<Slot> slots_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  Slot sum_;
};

// One flow (user x slice): FIFO buffer plus KPI accounting.
struct UserLink {
  UserId user = 0;
  Modality slice = Modality::haptic;
  int pair = 0;  // teleoperation pair that owns this flow
  std::deque<Packet> buffer;
  std::int64_t head_remaining_bits = 0;  // untransmitted bits of buffer.front()
  std::int64_t buffer_bits = 0;          // beta_o, sum of untransmitted bits
  KpiWindow window;
  double se = 0.0;

  std::int64_t hol_wait_ms(std::int64_t tti) const {
    return buffer.empty() ? 0 : tti - buffer.front().arrival_tti + 1;
  }
};

struct LinkStep {
  std::int64_t arrived_bits = 0;
  std::int64_t capacity_bits = 0;
  std::int64_t bits_sent = 0;
  std::int64_t bits_discarded = 0;  // untransmitted remainder of dropped packets
  std::int64_t delivered_bits = 0;  // full size of packets completed this TTI
  std::int64_t packets_delivered = 0;
  std::int64_t packets_discarded = 0;
  std::int64_t buffer_before = 0;  // at the end of the previous TTI
  std::int64_t buffer_after = 0;
  std::int64_t max_latency_ms = 0;
  std::int64_t discarded_wait_ms = 0;  // summed waiting time of dropped packets
};

struct LinkKpi {
  double tau_ms = 0.0;
  double rho = 0.0;
  double rate_bps = 0.0;
  double buffer_bits = 0.0;
  double se = 0.0;
  std::int64_t hol_wait_ms = 0;
  std::int64_t discards_in_window = 0;
};

struct SliceKpi {
  double tau_ms = 0.0;
  double rho = 0.0;
  double rate_bps = 0.0;
  double buffer_bits = 0.0;
  double se = 0.0;
};

struct KpiSnapshot {
  std::int64_t tti = 0;
  std::vector<LinkKpi> links;
  SliceKpi haptic;
  SliceKpi video;
  double worst_haptic_hol_ms = 0.0;  // tau-hat
  int worst_haptic_link = -1;

  const SliceKpi& slice(Modality m) const { return m == Modality::haptic ? haptic : video; }
};

// Link-layer cell: buffers, per-TTI transmission, deadline discards and
// windowed KPIs. A TTI is processed as: enqueue arrivals, begin_tti (discard
// expired packets), read occupancies for scheduling, transmit.
class Ran {
 public:
  Ran(RanConfig cfg, SliceSpec haptic, SliceSpec video)
      : cfg_(cfg), haptic_(haptic), video_(video) {
    cfg_.validate();
    haptic_.validate();
    video_.validate();
    if (haptic_.modality != Modality::haptic || video_.modality != Modality::video)
      throw ConfigError("ran: slice specs given in the wrong order");
  }

  const RanConfig& config() const { return cfg_; }
  const SliceSpec& spec(Modality m) const { return m == Modality::haptic ? haptic_ : video_; }
  std::size_t num_links() const { return links_.size(); }
  const UserLink& link(std::size_t i) const { return links_.at(i); }
  std::int64_t ttis_stepped() const { return ttis_stepped_; }

  std::size_t add_link(UserId user, Modality slice, int pair) {
    UserLink l;
    l.user = user;
    l.slice = slice;
    l.pair = pair;
    l.window = KpiWindow(cfg_.kpi_window_ttis);
    links_.push_back(std::move(l));
    pending_arrivals_.push_back(0);
    return links_.size() - 1;
  }

  void enqueue(std::size_t link, const Packet& p) {
    auto& l = links_.at(link);
    if (p.size_bits <= 0) throw std::invalid_argument("enqueue: packet size must be > 0");
    if (!l.buffer.empty() && p.arrival_tti < l.buffer.back().arrival_tti)
      throw std::invalid_argument("enqueue: arrivals must be in order");
    if (l.buffer.empty()) l.head_remaining_bits = p.size_bits;
    l.buffer.push_back(p);
    l.buffer_bits += p.size_bits;
    pending_arrivals_[link] += p.size_bits;
  }

  // Drops every packet whose wait including this TTI would exceed tau_max.
  void begin_tti(std::int64_t tti) {
    if (began_) throw std::logic_error("begin_tti: previous TTI not finished");
    if (tti < next_tti_) throw std::invalid_argument("begin_tti: tti went backwards");
    began_ = true;
    current_tti_ = tti;
    steps_.assign(links_.size(), LinkStep{});
    for (std::size_t i = 0; i < links_.size(); ++i) {
      auto& l = links_[i];
      auto& st = steps_[i];
      st.arrived_bits = pending_arrivals_[i];
      st.buffer_before = l.buffer_bits - pending_arrivals_[i];
      pending_arrivals_[i] = 0;
      const auto deadline = static_cast<std::int64_t>(spec(l.slice).max_buffer_delay_ms);
      while (!l.buffer.empty() && tti - l.buffer.front().arrival_tti + 1 > deadline) {
        st.discarded_wait_ms += tti - l.buffer.front().arrival_tti + 1;
        st.bits_discarded += l.head_remaining_bits;
        l.buffer_bits -= l.head_remaining_bits;
        ++st.packets_discarded;
        l.buffer.pop_front();
        l.head_remaining_bits = l.buffer.empty() ? 0 : l.buffer.front().size_bits;
      }
    }
  }

  std::vector<std::int64_t> occupancies(std::span<const std::size_t> link_ids) const {
    std::vector<std::int64_t> out;
    out.reserve(link_ids.size());
    for (auto i : link_ids) out.push_back(links_.at(i).buffer_bits);
    return out;
  }

  // Serves every link FIFO up to n_rb * 200 * se bits and closes the TTI.
  // Accounting of the most recent transmit().
  const std::vector<LinkStep>& last_steps() const { return steps_; }

  const std::vector<LinkStep>& transmit(std::span<const int> rbs, std::span<const double> se) {
    if (!began_) throw std::logic_error("transmit: begin_tti not called");
    if (rbs.size() != links_.size() || se.size() != links_.size())
      throw std::invalid_argument("transmit: allocation/se size mismatch");
    long total = 0;
    for (int n : rbs) {
      if (n < 0) throw std::invalid_argument("transmit: negative allocation");
      total += n;
    }
    if (total > cfg_.n_rb) throw std::invalid_argument("transmit: allocation exceeds n_rb");

    for (std::size_t i = 0; i < links_.size(); ++i) {
      auto& l = links_[i];
      auto& st = steps_[i];
      l.se = se[i];
      st.capacity_bits = rb_capacity_bits(cfg_, rbs[i], se[i]);
      std::int64_t budget = st.capacity_bits;
      KpiWindow::Slot slot;
      slot.discarded = st.packets_discarded;
      slot.latency_sum_ms = st.discarded_wait_ms;
      while (budget > 0 && !l.buffer.empty()) {
        const auto take = std::min(budget, l.head_remaining_bits);
        budget -= take;
        l.head_remaining_bits -= take;
        l.buffer_bits -= take;
        st.bits_sent += take;
        if (l.head_remaining_bits == 0) {
          const auto& p = l.buffer.front();
          const auto latency = current_tti_ - p.arrival_tti + 1;
          ++slot.delivered;
          slot.latency_sum_ms += latency;
          slot.delivered_bits += p.size_bits;
          st.max_latency_ms = std::max(st.max_latency_ms, latency);
          l.buffer.pop_front();
          l.head_remaining_bits = l.buffer.empty() ? 0 : l.buffer.front().size_bits;
        }
      }
      st.packets_delivered = slot.delivered;
      st.delivered_bits = slot.delivered_bits;
      st.buffer_after = l.buffer_bits;
      l.window.push(slot);
    }
    began_ = false;
    next_tti_ = current_tti_ + 1;
    ++ttis_stepped_;
    return steps_;
  }

  const std::vector<LinkStep>& step_tti(std::int64_t tti, std::span<const int> rbs,
                                        std::span<const double> se) {
    begin_tti(tti);
    return transmit(rbs, se);
  }

  LinkKpi link_kpi(std::size_t i) const {
    const auto& l = links_.at(i);
    const auto& s = l.window.sum();
    LinkKpi k;
    if (s.delivered + s.discarded > 0)
      k.tau_ms = static_cast<double>(s.latency_sum_ms) / static_cast<double>(s.delivered + s.discarded);
    if (s.delivered + s.discarded > 0)
      k.rho = static_cast<double>(s.discarded) / static_cast<double>(s.delivered + s.discarded);
    if (l.window.filled() > 0)
      k.rate_bps = static_cast<double>(s.delivered_bits) /
                   (static_cast<double>(l.window.filled()) * cfg_.tti_ms / 1000.0);
    k.buffer_bits = static_cast<double>(l.buffer_bits);
    k.se = l.se;
    k.hol_wait_ms = l.hol_wait_ms(next_tti_ - 1);
    k.discards_in_window = s.discarded;
    return k;
  }

  // Per-link windowed KPIs plus slice aggregates: latency and loss pooled over
  // the slice's packets, rate / buffer / SE averaged over the slice's links.
  KpiSnapshot snapshot() const {
    KpiSnapshot snap;
    snap.tti = next_tti_ - 1;
    snap.links.reserve(links_.size());
    struct Acc {
      std::int64_t delivered = 0, latency = 0, discarded = 0;
      double rate = 0, buffer = 0, se = 0;
      int n = 0;
    } acc[2];
    double worst_se = 0.0;
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const auto& l = links_[i];
      snap.links.push_back(link_kpi(i));
      auto& a = acc[l.slice == Modality::haptic ? 0 : 1];
      const auto& s = l.window.sum();
      a.delivered += s.delivered;
      a.latency += s.latency_sum_ms;
      a.discarded += s.discarded;
      a.rate += snap.links.back().rate_bps;
      a.buffer += snap.links.back().buffer_bits;
      a.se += l.se;
      ++a.n;
      if (l.slice == Modality::haptic) {
        const bool worse = snap.worst_haptic_link < 0 || l.se < worst_se ||
                           (l.se == worst_se && l.user < links_[snap.worst_haptic_link].user);
        if (worse) {
          snap.worst_haptic_link = static_cast<int>(i);
          worst_se = l.se;
        }
      }
    }
    for (int k = 0; k < 2; ++k) {
      SliceKpi& out = k == 0 ? snap.haptic : snap.video;
      const auto& a = acc[k];
      if (a.delivered + a.discarded > 0)
        out.tau_ms = static_cast<double>(a.latency) / static_cast<double>(a.delivered + a.discarded);
      if (a.delivered + a.discarded > 0)
        out.rho = static_cast<double>(a.discarded) / static_cast<double>(a.delivered + a.discarded);
      if (a.n > 0) {
        out.rate_bps = a.rate / a.n;
        out.buffer_bits = a.buffer / a.n;
        out.se = a.se / a.n;
      }
    }
    if (snap.worst_haptic_link >= 0)
      snap.worst_haptic_hol_ms = static_cast<double>(
          snap.links[static_cast<std::size_t>(snap.worst_haptic_link)].hol_wait_ms);
    return snap;
  }

 private:
  RanConfig cfg_;
  SliceSpec haptic_;
  SliceSpec video_;
  std::vector<UserLink> links_;
  std::vector<std::int64_t> pending_arrivals_;
  std::vector<LinkStep> steps_;
  bool began_ = false;
  std::int64_t current_tti_ = 0;
  std::int64_t next_tti_ = 0;
  std::int64_t ttis_stepped_ = 0;
};

// Requirement check for one flow. Latency and loss use the windowed KPIs.
// The rate floor is waived when the flow is not backlogged (no discards in
// the window and head-of-line wait within tau_0): a source that offers less
// than r_0, or whose goodput dips only through packet quantization of the
// window, is not rate-limited by the network.
inline bool flow_satisfied(const LinkKpi& k, const SliceSpec& spec) {
  if (k.tau_ms > spec.latency_req_ms) return false;
  if (k.rho > spec.loss_req) return false;
  if (k.rate_bps >= spec.rate_req_bps) return true;
  const bool backlogged = k.discards_in_window > 0 ||
                          static_cast<double>(k.hol_wait_ms) > spec.latency_req_ms;
  return !backlogged;
}

// Per-pair satisfaction: a pair is satisfied iff every flow it owns is.
inline std::vector<bool> check_satisfaction(const Ran& ran, const KpiSnapshot& snap, int num_pairs) {
  std::vector<bool> ok(static_cast<std::size_t>(num_pairs), true);
  for (std::size_t i = 0; i < ran.num_links(); ++i) {
    const auto& l = ran.link(i);
    if (l.pair < 0 || l.pair >= num_pairs) continue;
    if (!flow_satisfied(snap.links[i], ran.spec(l.slice)))
      ok[static_cast<std::size_t>(l.pair)] = false;
  }
  return ok;
}

}  // namespace vhslice
