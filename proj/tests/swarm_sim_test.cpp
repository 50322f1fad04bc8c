#include <gtest/gtest.h>

#include <cmath>

#include "webswarm/experiment.hpp"
#include "webswarm/random.hpp"
#include "webswarm/swarm_sim.hpp"

using namespace webswarm;

namespace {

ExperimentConfig small_mc(std::uint64_t tasks = 20, std::uint32_t slots = 4) {
  ExperimentConfig c;
  c.total_tasks = tasks;
  c.task_size = 1'000'000;
  c.worker_slots = slots;
  c.compute_scale = 1e-6;  // 1 s per task
  return c;
}

}  // namespace

TEST(Dwell, ConstantIsUnbounded) {
  SplitMix64 rng(1);
  EXPECT_TRUE(std::isinf(dwell::sample(DwellModel{}, rng)));
}

TEST(Dwell, InverseTransform) {
  const DwellModel m{DwellKind::Weibull, 0.75, 12.0};
  SplitMix64 rng(5);
  for (int i = 0; i < 100; ++i) {
    SplitMix64 copy = rng;
    const double u = copy.uniform();
    EXPECT_DOUBLE_EQ(dwell::sample(m, rng), 12.0 * std::pow(-std::log1p(-u), 1.0 / 0.75));
  }
}

TEST(Dwell, ExponentialSpecialCase) {
  // k = 1 and u = 1 - 1/e gives exactly the scale.
  EXPECT_NEAR(dwell::weibull_cdf(30.0, 1.0, 30.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(dwell::weibull_median(0.5, 30.0), 30.0 * std::log(2.0) * std::log(2.0), 1e-12);
  EXPECT_NEAR(dwell::weibull_median(0.5, 30.0), 14.41, 0.01);
  EXPECT_NEAR(dwell::weibull_mean(0.5, 30.0), 60.0, 1e-9);
}

TEST(Dwell, SampleMeanAndMedian) {
  const DwellModel m{DwellKind::Weibull, 0.5, 30.0};
  SplitMix64 rng(11);
  std::vector<double> xs;
  for (int i = 0; i < 200000; ++i) xs.push_back(dwell::sample(m, rng));
  double sum = 0;
  for (double x : xs) sum += x;
  EXPECT_NEAR(sum / xs.size(), 60.0, 60.0 * 0.03);
  std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
  EXPECT_NEAR(xs[xs.size() / 2], 14.41, 14.41 * 0.02);
}

TEST(Dwell, Normalizations) {
  for (double k : {0.5, 0.75, 1.0}) {
    EXPECT_NEAR(dwell::weibull_mean(k, dwell::scale_for_mean(5.0, k)), 5.0, 1e-12);
    EXPECT_NEAR(dwell::weibull_median(k, dwell::scale_for_median(5.0, k)), 5.0, 1e-12);
    EXPECT_EQ(dwell::weibull(k, 5.0, DwellNormalization::Explicit).scale, 5.0);
  }
}

TEST(Dwell, KsDetectsWrongDistribution) {
  SplitMix64 rng(2);
  std::vector<double> xs;
  for (int i = 0; i < 5000; ++i) xs.push_back(dwell::sample(DwellModel{DwellKind::Weibull, 1.0, 10.0}, rng));
  const double crit = dwell::ks_critical(xs.size(), 0.01);
  EXPECT_LT(dwell::ks_statistic(xs, 1.0, 10.0), crit);
  EXPECT_GT(dwell::ks_statistic(xs, 0.5, 10.0), crit);
  EXPECT_NEAR(dwell::ks_critical(10000, 0.01), 1.6276 / 100.0, 1e-4);
}

TEST(VirtualSwarm, ConstantDwellDrainsWithoutWaste) {
  const auto c = small_mc();
  const auto r = run_virtual(c, "t");
  EXPECT_TRUE(r.drained);
  EXPECT_EQ(r.summary.completions, 20u);
  EXPECT_EQ(r.summary.pushes, 20u);
  EXPECT_EQ(r.summary.wasted_dispatches, 0u);
  EXPECT_EQ(r.summary.sessions, 4u);
  EXPECT_EQ(r.summary.value_sessions, 4u);
  EXPECT_GT(r.summary.runtime_s, 5.0);
  EXPECT_LT(r.summary.runtime_s, 7.0);
}

TEST(VirtualSwarm, Deterministic) {
  auto c = small_mc(30, 6);
  c.dwell = dwell::weibull(0.5, 2.0, DwellNormalization::SharedMean);
  const auto a = run_virtual_swarm(c);
  const auto b = run_virtual_swarm(c);
  EXPECT_EQ(a.events, b.events);
  c.rng_seed = 2;
  EXPECT_NE(run_virtual_swarm(c).events, a.events);
}

TEST(VirtualSwarm, StarvationAbortsAtCap) {
  auto c = small_mc(5, 2);
  c.compute_scale = 1e-5;  // 10 s per task
  c.max_time_s = 60;
  SwarmOptions o;
  o.dwell_override = [](std::size_t, std::size_t) { return 2.0; };
  const auto r = run_virtual(c, "starve", o);
  EXPECT_FALSE(r.drained);
  EXPECT_EQ(r.summary.completions, 0u);
  EXPECT_EQ(r.summary.value_sessions, 0u);
  EXPECT_GT(r.summary.non_value_sessions, 0u);
  EXPECT_NEAR(r.summary.runtime_s, 60.0, 1.0);
}

TEST(VirtualSwarm, AsyncPrefetchWithInstantNetworkHasNoDowntime) {
  auto c = small_mc(40, 4);
  c.policy = PolicyConfig::async_prefetch(5, 2);
  c.network = NetworkModel{0.0, 1e18, 0.0, 0.0, 0.0};
  const auto r = run_virtual(c, "instant");
  EXPECT_TRUE(r.drained);
  EXPECT_NEAR(r.summary.downtime_s, 0.0, 1e-9);
}

// Same seed, two transports: identical task results, different byte counts.
TEST(VirtualSwarm, TransportPairedRun) {
  auto c = small_mc(12, 3);
  c.task_size = 20'000;
  c.execute_kernels = true;
  c.dwell = dwell::weibull(0.75, 3.0, DwellNormalization::SharedMean);
  const auto rr = run_virtual(c, "rr");
  c.transport = Transport::Stream;
  const auto ws = run_virtual(c, "ws");
  ASSERT_TRUE(rr.drained);
  ASSERT_TRUE(ws.drained);
  EXPECT_EQ(rr.results, ws.results);
  EXPECT_GT(rr.summary.rr_bytes_in + rr.summary.rr_bytes_out, 0u);
  EXPECT_GT(ws.summary.stream_bytes_in + ws.summary.stream_bytes_out, 0u);
  EXPECT_NE(rr.summary.rr_bytes_in + rr.summary.rr_bytes_out + rr.summary.stream_bytes_in,
            ws.summary.rr_bytes_in + ws.summary.rr_bytes_out + ws.summary.stream_bytes_in);
}

TEST(VirtualSwarm, ChurnStillConserves) {
  auto c = small_mc(50, 8);
  c.dwell = dwell::weibull(0.5, 2.0, DwellNormalization::SharedMean);
  c.policy = PolicyConfig::sync_single(250'000);
  const auto r = run_virtual(c, "churn");
  EXPECT_TRUE(r.drained);
  EXPECT_EQ(r.summary.completions, 50u);
  EXPECT_EQ(r.results.size(), 50u);
}
