#include <gtest/gtest.h>

#include <deque>
#include <random>

#include "vhslice/ran.hpp"

using namespace vhslice;

namespace {

Ran make_ran() { return Ran(RanConfig{}, SliceSpec::haptic(), SliceSpec::video()); }

Packet pkt(std::uint64_t id, std::int64_t tti, std::int64_t bits, Modality m = Modality::haptic) {
  return Packet{id, tti, bits, m};
}

// Independent event-level model of one link for KPI replay.
struct OracleLink {
  struct Item {
    std::int64_t arrival, remaining, size;
  };
  struct Event {
    std::int64_t tti;
    bool delivered;
    std::int64_t wait;
    std::int64_t bits;
  };
  std::deque<Item> q;
  std::vector<Event> events;
  std::int64_t deadline;

  void tti(std::int64_t t, std::int64_t capacity) {
    while (!q.empty() && t - q.front().arrival + 1 > deadline) {
      events.push_back({t, false, t - q.front().arrival + 1, 0});
      q.pop_front();
    }
    while (capacity > 0 && !q.empty()) {
      auto& h = q.front();
      const auto take = std::min(capacity, h.remaining);
      capacity -= take;
      h.remaining -= take;
      if (h.remaining == 0) {
        events.push_back({t, true, t - h.arrival + 1, h.size});
        q.pop_front();
      }
    }
  }

  // Window of the last `w` TTIs ending at t.
  void kpi(std::int64_t t, int w, double& tau, double& rho, double& rate) const {
    std::int64_t n = 0, lost = 0, wait = 0, bits = 0;
    for (const auto& e : events) {
      if (e.tti <= t - w || e.tti > t) continue;
      ++n;
      wait += e.wait;
      if (e.delivered)
        bits += e.bits;
      else
        ++lost;
    }
    tau = n ? static_cast<double>(wait) / static_cast<double>(n) : 0.0;
    rho = n ? static_cast<double>(lost) / static_cast<double>(n) : 0.0;
    const auto filled = std::min<std::int64_t>(t + 1, w);
    rate = static_cast<double>(bits) / (static_cast<double>(filled) / 1000.0);
  }
};

}  // namespace

TEST(Ran, CapacityArithmetic) {
  RanConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.bits_per_rb_per_se(), 200.0);
  EXPECT_EQ(rb_capacity_bits(cfg, 1, 5.0), 1000);
  EXPECT_EQ(rb_capacity_bits(cfg, 10, 5.0), 10000);
  EXPECT_EQ(rb_capacity_bits(cfg, 3, 4.2), 2520);
  EXPECT_EQ(rb_capacity_bits(cfg, 0, 6.0), 0);
}

TEST(Ran, HapticPacketDeliveredInSameTti) {
  auto ran = make_ran();
  const auto l = ran.add_link(0, Modality::haptic, 0);
  ran.enqueue(l, pkt(1, 0, 64));
  const int rbs[] = {1};
  const double se[] = {5.0};
  const auto& st = ran.step_tti(0, rbs, se);
  EXPECT_EQ(st[0].capacity_bits, 1000);
  EXPECT_EQ(st[0].bits_sent, 64);
  EXPECT_EQ(st[0].packets_delivered, 1);
  EXPECT_EQ(st[0].max_latency_ms, 1);
  EXPECT_EQ(ran.link(l).buffer_bits, 0);
}

TEST(Ran, ZeroRbsSendNothing) {
  auto ran = make_ran();
  const auto l = ran.add_link(0, Modality::haptic, 0);
  const int rbs[] = {0};
  const double se[] = {5.0};
  for (std::int64_t t = 0; t < 5; ++t) {
    ran.enqueue(l, pkt(static_cast<std::uint64_t>(t), t, 64));
    const auto& st = ran.step_tti(t, rbs, se);
    EXPECT_EQ(st[0].bits_sent, 0);
    EXPECT_EQ(st[0].packets_discarded, 0);
  }
  EXPECT_EQ(ran.link(l).buffer_bits, 5 * 64);
}

TEST(Ran, VideoPacketTakesFourteenTtis) {
  auto ran = make_ran();
  const auto l = ran.add_link(0, Modality::video, 0);
  ran.enqueue(l, pkt(1, 0, 133336, Modality::video));
  const int rbs[] = {10};
  const double se[] = {5.0};
  std::int64_t delivered_at = -1;
  for (std::int64_t t = 0; t < 20 && delivered_at < 0; ++t)
    if (ran.step_tti(t, rbs, se)[0].packets_delivered == 1) delivered_at = t;
  EXPECT_EQ(delivered_at + 1, (133336 + 9999) / 10000);
  EXPECT_EQ(ran.link_kpi(l).tau_ms, 14.0);
}

TEST(Ran, EmptyWindowKpisAreZero) {
  auto ran = make_ran();
  const auto l = ran.add_link(0, Modality::haptic, 0);
  const int rbs[] = {5};
  const double se[] = {5.0};
  ran.step_tti(0, rbs, se);
  const auto k = ran.link_kpi(l);
  EXPECT_EQ(k.tau_ms, 0.0);
  EXPECT_EQ(k.rho, 0.0);
  EXPECT_EQ(k.rate_bps, 0.0);
  const auto snap = ran.snapshot();
  EXPECT_EQ(snap.haptic.tau_ms, 0.0);
  EXPECT_EQ(snap.haptic.rho, 0.0);
  EXPECT_EQ(snap.video.rate_bps, 0.0);
}

TEST(Ran, NineDeliveredOneDiscardedIsTenPercentLoss) {
  auto ran = make_ran();
  const auto l = ran.add_link(0, Modality::haptic, 0);
  const double se[] = {5.0};
  ran.enqueue(l, pkt(0, 0, 64));
  const int none[] = {0};
  const int some[] = {1};
  // first packet waits 21 TTIs and is dropped at tti 20
  for (std::int64_t t = 0; t < 20; ++t) ran.step_tti(t, none, se);
  for (std::int64_t t = 20; t < 29; ++t) {
    ran.enqueue(l, pkt(static_cast<std::uint64_t>(t), t, 64));
    const auto& st = ran.step_tti(t, some, se);
    if (t == 20) EXPECT_EQ(st[0].packets_discarded, 1);
  }
  EXPECT_DOUBLE_EQ(ran.link_kpi(l).rho, 0.1);
}

TEST(Ran, DeadlineDiscardsAtFirstTtiPastTauMax) {
  auto ran = make_ran();
  const auto l = ran.add_link(0, Modality::haptic, 0);
  ran.enqueue(l, pkt(0, 0, 64));
  const int none[] = {0};
  const double se[] = {5.0};
  for (std::int64_t t = 0; t < 20; ++t) EXPECT_EQ(ran.step_tti(t, none, se)[0].packets_discarded, 0) << t;
  const auto& st = ran.step_tti(20, none, se);
  EXPECT_EQ(st[0].packets_discarded, 1);
  EXPECT_EQ(st[0].bits_discarded, 64);
  EXPECT_EQ(st[0].discarded_wait_ms, 21);
}

TEST(Ran, PartialHeadTransmissionCountsRemainderOnDiscard) {
  auto ran = make_ran();
  const auto l = ran.add_link(0, Modality::video, 0);
  ran.enqueue(l, pkt(0, 0, 133336, Modality::video));
  const int one[] = {1};
  const int none[] = {0};
  const double se[] = {5.0};
  ran.step_tti(0, one, se);  // 1000 bits sent
  for (std::int64_t t = 1; t < 100; ++t) ran.step_tti(t, none, se);
  const auto& st = ran.step_tti(100, none, se);
  EXPECT_EQ(st[0].bits_discarded, 133336 - 1000);
  EXPECT_EQ(ran.link(l).buffer_bits, 0);
}

TEST(Ran, RejectsOverAllocationAndOrderErrors) {
  auto ran = make_ran();
  ran.add_link(0, Modality::haptic, 0);
  ran.add_link(1, Modality::video, 0);
  const int too_many[] = {60, 41};
  const double se[] = {5.0, 5.0};
  ran.begin_tti(0);
  EXPECT_THROW(ran.transmit(too_many, se), std::invalid_argument);
  EXPECT_THROW(ran.begin_tti(1), std::logic_error);
  auto ran2 = make_ran();
  const auto l = ran2.add_link(0, Modality::haptic, 0);
  ran2.enqueue(l, pkt(0, 5, 64));
  EXPECT_THROW(ran2.enqueue(l, pkt(1, 4, 64)), std::invalid_argument);
  EXPECT_THROW(ran2.enqueue(l, pkt(2, 6, 0)), std::invalid_argument);
}

TEST(Ran, RandomRunMatchesReplayOracleAndInvariants) {
  std::mt19937_64 rng(31);
  RanConfig cfg;
  cfg.kpi_window_ttis = 50;
  Ran ran(cfg, SliceSpec::haptic(), SliceSpec::video());
  const int links = 6;
  std::vector<OracleLink> oracle;
  for (int i = 0; i < links; ++i) {
    const auto m = i % 2 == 0 ? Modality::haptic : Modality::video;
    ran.add_link(i, m, i / 2);
    oracle.push_back({{}, {}, m == Modality::haptic ? 20 : 100});
  }
  std::uniform_real_distribution<double> se_d(3.0, 7.0);
  std::vector<std::uint64_t> last_delivered_id(links, 0);
  std::uint64_t next_id = 1;
  std::vector<std::deque<std::uint64_t>> ids(links);
  for (std::int64_t t = 0; t < 3000; ++t) {
    std::vector<int> rbs(links);
    std::vector<double> se(links);
    int budget = 100;
    for (int i = 0; i < links; ++i) {
      const bool haptic = i % 2 == 0;
      if (std::bernoulli_distribution(haptic ? 0.9 : 0.05)(rng)) {
        const std::int64_t bits = haptic ? 64 : std::uniform_int_distribution<std::int64_t>(1000, 140000)(rng);
        ran.enqueue(static_cast<std::size_t>(i), pkt(next_id, t, bits));
        oracle[static_cast<std::size_t>(i)].q.push_back({t, bits, bits});
        ids[static_cast<std::size_t>(i)].push_back(next_id++);
      }
      rbs[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, std::min(budget, haptic ? 2 : 25))(rng);
      budget -= rbs[static_cast<std::size_t>(i)];
      se[static_cast<std::size_t>(i)] = se_d(rng);
    }
    std::vector<std::int64_t> before(links);
    for (int i = 0; i < links; ++i) before[static_cast<std::size_t>(i)] = ran.link(static_cast<std::size_t>(i)).buffer_bits;
    ran.begin_tti(t);
    // FIFO: record which ids are still queued after discards
    const auto& st = ran.transmit(rbs, se);
    for (int i = 0; i < links; ++i) {
      const auto u = static_cast<std::size_t>(i);
      auto& o = oracle[u];
      const auto cap = static_cast<std::int64_t>(std::floor(rbs[u] * 200.0 * se[u]));
      o.tti(t, cap);
      const auto& s = st[u];
      // conservation: arrivals = sent + discarded + change in buffer
      ASSERT_EQ(s.arrived_bits, s.bits_sent + s.bits_discarded + (s.buffer_after - s.buffer_before));
      ASSERT_LE(s.bits_sent, cap);
      ASSERT_LE(s.max_latency_ms, o.deadline);
      if (s.packets_discarded > 0) ASSERT_GT(s.discarded_wait_ms, s.packets_discarded * o.deadline);
      double tau, rho, rate;
      o.kpi(t, cfg.kpi_window_ttis, tau, rho, rate);
      const auto k = ran.link_kpi(u);
      ASSERT_NEAR(k.tau_ms, tau, 1e-9) << "link " << i << " tti " << t;
      ASSERT_NEAR(k.rho, rho, 1e-12);
      ASSERT_NEAR(k.rate_bps, rate, 1e-6);
      std::int64_t queued = 0;
      for (const auto& it : o.q) queued += it.remaining;
      ASSERT_EQ(ran.link(u).buffer_bits, queued);
      ASSERT_EQ(ran.link(u).buffer.size(), o.q.size());
      if (!o.q.empty()) ASSERT_EQ(ran.link(u).buffer.front().arrival_tti, o.q.front().arrival);
    }
  }
}

TEST(Ran, FifoDeliveryOrder) {
  auto ran = make_ran();
  const auto l = ran.add_link(0, Modality::video, 0);
  for (std::uint64_t i = 0; i < 5; ++i) ran.enqueue(l, pkt(i, 0, 3000 + 500 * static_cast<std::int64_t>(i), Modality::video));
  const int rbs[] = {2};
  const double se[] = {5.0};
  std::uint64_t expect = 0;
  for (std::int64_t t = 0; t < 40 && !ran.link(l).buffer.empty(); ++t) {
    const auto front = ran.link(l).buffer.front().id;
    EXPECT_EQ(front, expect);
    const auto& st = ran.step_tti(t, rbs, se);
    expect += static_cast<std::uint64_t>(st[0].packets_delivered);
  }
  EXPECT_EQ(expect, 5u);
}

TEST(Ran, SliceAggregatesPoolPacketsAndAverageLinks) {
  auto ran = make_ran();
  const auto a = ran.add_link(0, Modality::haptic, 0);
  const auto b = ran.add_link(1, Modality::haptic, 0);
  ran.enqueue(a, pkt(0, 0, 64));
  ran.enqueue(a, pkt(1, 0, 64));
  ran.enqueue(b, pkt(2, 0, 64));
  const int rbs[] = {1, 0};
  const double se[] = {5.0, 4.0};
  ran.step_tti(0, rbs, se);
  ran.enqueue(b, pkt(3, 1, 64));
  const int rbs2[] = {0, 1};
  ran.step_tti(1, rbs2, se);
  // delivered: a:{1,1} at tti 0, b:{2,1} at tti 1 -> pooled tau = 5/4
  const auto snap = ran.snapshot();
  EXPECT_DOUBLE_EQ(snap.haptic.tau_ms, 5.0 / 4.0);
  EXPECT_DOUBLE_EQ(snap.haptic.se, 4.5);
  EXPECT_EQ(snap.worst_haptic_link, 1);
  EXPECT_DOUBLE_EQ(snap.haptic.rate_bps, (128.0 / 0.002 + 128.0 / 0.002) / 2.0);
}

TEST(Satisfaction, InclusiveThresholds) {
  const auto h = SliceSpec::haptic();
  LinkKpi k;
  k.tau_ms = 10.0;
  k.rho = 1e-5;
  k.rate_bps = 0.2e6;
  EXPECT_TRUE(flow_satisfied(k, h));
  k.tau_ms = 11.0;
  EXPECT_FALSE(flow_satisfied(k, h));
}

TEST(Satisfaction, VideoLossFivePercentIsFine) {
  const auto v = SliceSpec::video();
  LinkKpi k;
  k.tau_ms = 30.0;
  k.rho = 0.05;
  k.rate_bps = 4.1e6;
  EXPECT_TRUE(flow_satisfied(k, v));
  k.rho = 0.11;
  EXPECT_FALSE(flow_satisfied(k, v));
}

TEST(Satisfaction, RateFloorAppliesOnlyWhenBacklogged) {
  const auto h = SliceSpec::haptic();
  LinkKpi k;
  k.tau_ms = 1.0;
  k.rate_bps = 64000.0;  // source offers less than r0
  EXPECT_TRUE(flow_satisfied(k, h));
  k.hol_wait_ms = 15;
  EXPECT_FALSE(flow_satisfied(k, h));
  k.hol_wait_ms = 0;
  k.discards_in_window = 1;
  EXPECT_FALSE(flow_satisfied(k, h));
}

TEST(Satisfaction, PairNeedsEveryFlow) {
  auto ran = make_ran();
  ran.add_link(0, Modality::haptic, 0);
  ran.add_link(2, Modality::haptic, 0);
  ran.add_link(1, Modality::haptic, 1);
  const int rbs[] = {0, 0, 0};
  const double se[] = {5.0, 5.0, 5.0};
  ran.enqueue(1, pkt(0, 0, 64));
  for (std::int64_t t = 0; t < 12; ++t) ran.step_tti(t, rbs, se);
  const auto snap = ran.snapshot();
  const auto ok = check_satisfaction(ran, snap, 2);
  EXPECT_FALSE(ok[0]);  // pair 0's second flow waits 12 ms
  EXPECT_TRUE(ok[1]);
}
